#include "bidrec/aggregate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>

#include "bidrec/csv.hpp"
#include "bidrec/errors.hpp"
#include "bidrec/parallel.hpp"

namespace bidrec::aggregate {

void AggregationConfig::validate() const {
  if (!(outlier_sigma > 0) || !std::isfinite(outlier_sigma)) throw ConfigError("outlier_sigma must be a positive number");
  if (grouping_fields.empty()) throw ConfigError("grouping_fields must not be empty");
}

Aggregator::Aggregator(std::span<const FeatureField> grouping_fields) : fields_(grouping_fields.begin(), grouping_fields.end()) {
  std::sort(fields_.begin(), fields_.end());
  fields_.erase(std::unique(fields_.begin(), fields_.end()), fields_.end());
  project_ = fields_.size() != kFeatureFieldCount;
}

FeatureCombination Aggregator::project(const FeatureCombination& key) const {
  return project_ ? key.project(fields_) : key;
}

void Aggregator::add(const ingest::FeatureEvent& event) {
  auto [it, inserted] = groups_.try_emplace(project(event.key));
  if (inserted) it->second.key = it->first;
  FeatureStats& s = it->second;
  ++s.impressions;
  if (event.is_click) ++s.clicks;
  s.cost += event.cost;
}

void Aggregator::add(const FeatureStats& stats) {
  auto [it, inserted] = groups_.try_emplace(project(stats.key));
  if (inserted) it->second.key = it->first;
  it->second += stats;
}

void Aggregator::merge(const Aggregator& other) {
  for (const auto& [key, stats] : other.groups_) add(stats);
}

std::vector<FeatureStats> Aggregator::finish() const {
  std::vector<FeatureStats> out;
  out.reserve(groups_.size());
  for (const auto& [key, stats] : groups_) out.push_back(stats);
  std::sort(out.begin(), out.end(), [](const FeatureStats& a, const FeatureStats& b) { return a.key < b.key; });
  return out;
}

std::vector<FeatureStats> group_stats(std::span<const ingest::FeatureEvent> events, const AggregationConfig& config,
                                      std::size_t partitions, unsigned threads) {
  config.validate();
  partitions = std::max<std::size_t>(1, partitions);
  std::vector<Aggregator> partials(partitions, Aggregator(config.grouping_fields));
  for_each_part(events.size(), partitions, resolve_threads(threads), [&](std::size_t p, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) partials[p].add(events[i]);
  });
  Aggregator total(config.grouping_fields);
  for (const auto& part : partials) total.merge(part);
  return total.finish();
}

std::vector<FeatureStats> remove_outliers(std::span<const FeatureStats> stats, double sigma, OutlierMetric metric) {
  if (!(sigma > 0) || !std::isfinite(sigma)) throw ConfigError("outlier sigma must be a positive number");
  if (stats.empty()) return {};

  std::vector<FeatureStats> kept;
  kept.reserve(stats.size());

  if (metric == OutlierMetric::Impressions) {
    // Exact integer test: with n features, S = sum x and Q = sum x^2,
    // |x - mean| <= k*sd  <=>  (n*x - S)^2 <= k^2 * (n*Q - S^2).
    const auto n = static_cast<Int128>(stats.size());
    Int128 sum = 0;
    Int128 sum_sq = 0;
    for (const auto& s : stats) {
      const auto x = static_cast<Int128>(s.impressions);
      sum += x;
      sum_sq += x * x;
    }
    const Int128 spread = n * sum_sq - sum * sum;
    if (spread == 0) return {stats.begin(), stats.end()};

    const double k2 = sigma * sigma;
    const bool integral_k2 = k2 == std::floor(k2) && k2 <= 1e12;
    for (const auto& s : stats) {
      const Int128 d = n * static_cast<Int128>(s.impressions) - sum;
      const Int128 d2 = d * d;
      const bool within = integral_k2 ? d2 <= static_cast<Int128>(k2) * spread
                                      : static_cast<long double>(d2) <= static_cast<long double>(k2) * static_cast<long double>(spread);
      if (within) kept.push_back(s);
    }
    return kept;
  }

  double mean = 0.0;
  for (const auto& s : stats) mean += s.ctr();
  mean /= static_cast<double>(stats.size());
  double var = 0.0;
  for (const auto& s : stats) var += (s.ctr() - mean) * (s.ctr() - mean);
  var /= static_cast<double>(stats.size());
  const double sd = std::sqrt(var);
  if (sd == 0.0) return {stats.begin(), stats.end()};
  for (const auto& s : stats) {
    if (std::fabs(s.ctr() - mean) <= sigma * sd) kept.push_back(s);
  }
  return kept;
}

Prior compute_prior(std::span<const FeatureStats> stats) {
  if (stats.empty()) throw PriorUnavailable();
  Int128 impressions = 0;
  Int128 clicks = 0;
  Money cost;
  for (const auto& s : stats) {
    impressions += s.impressions;
    clicks += s.clicks;
    cost += s.cost;
  }
  const auto n = static_cast<double>(stats.size());
  const auto total_imps = static_cast<double>(impressions);
  const double cpm = impressions == 0 ? 0.0 : cost.usd() / total_imps * 1000.0;
  return Prior::make(static_cast<double>(clicks) / n, total_imps / n, cpm);
}

double adjusted_ctr(const Prior& prior, const FeatureStats& stats) {
  const double denom = prior.prior_impressions + static_cast<double>(stats.impressions);
  if (!(denom > 0)) throw DegenerateFeature();
  return (prior.prior_clicks + static_cast<double>(stats.clicks)) / denom;
}

AdjustedCost adjusted_cpm(const Prior& prior, const FeatureStats& stats) {
  const auto feature_imps = static_cast<double>(stats.impressions);
  const double total_imps = prior.prior_impressions + feature_imps;
  if (!(total_imps > 0)) throw DegenerateFeature();
  const double feature_cpm = stats.impressions == 0 ? 0.0 : stats.cost.usd() / feature_imps * 1000.0;
  AdjustedCost out;
  out.cost_usd = prior.prior_cpm_usd * prior.prior_impressions / 1000.0 + feature_cpm * feature_imps / 1000.0;
  out.impressions = total_imps;
  out.cpm_usd = out.cost_usd / out.impressions * 1000.0;
  return out;
}

AdjustedMetrics adjust(const Prior& prior, const FeatureStats& stats) {
  const AdjustedCost cost = adjusted_cpm(prior, stats);
  return AdjustedMetrics::make(adjusted_ctr(prior, stats), cost.cost_usd, cost.impressions, cost.cpm_usd);
}

void write_aggregates_csv(std::ostream& out, std::span<const FeatureStats> stats, const Prior& prior) {
  std::vector<std::string> row(kFeatureFieldNames.begin(), kFeatureFieldNames.end());
  row.insert(row.end(), {"impressions", "clicks", "cost_usd", "adjusted_ctr", "adjusted_cpm_usd"});
  csv::write_row(out, row);
  for (const auto& s : stats) {
    const AdjustedMetrics m = adjust(prior, s);
    const auto key = s.key.to_fields();
    row.assign(key.begin(), key.end());
    row.push_back(std::to_string(s.impressions));
    row.push_back(std::to_string(s.clicks));
    row.push_back(s.cost.to_string());
    row.push_back(csv::format_shortest(m.adjusted_ctr));
    row.push_back(csv::format_shortest(m.adjusted_cpm_usd));
    csv::write_row(out, row);
  }
}

std::vector<FeatureStats> read_stats_csv(std::istream& in) {
  csv::Reader reader(in);
  std::vector<std::string> header;
  if (!reader.next(header)) throw DataError("stats file is empty");

  auto column = [&](std::string_view name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("stats file is missing column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  std::array<std::size_t, kFeatureFieldCount> key_index{};
  for (std::size_t i = 0; i < kFeatureFieldCount; ++i) key_index[i] = column(kFeatureFieldNames[i]);
  const std::size_t imps_index = column("impressions");
  const std::size_t clicks_index = column("clicks");
  const std::size_t cost_index = column("cost_usd");

  auto parse_count = [&](const std::string& text, std::uint64_t& out) {
    const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    return res.ec == std::errc() && res.ptr == text.data() + text.size();
  };

  std::vector<FeatureStats> out;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    const std::string where = "stats file record " + std::to_string(reader.record_number());
    if (fields.size() != header.size()) throw DataError(where + ": wrong column count");
    std::array<std::string, kFeatureFieldCount> key_fields;
    for (std::size_t i = 0; i < kFeatureFieldCount; ++i) key_fields[i] = fields[key_index[i]];
    FeatureStats s;
    try {
      s.key = FeatureCombination::from_fields(key_fields);
    } catch (const std::invalid_argument& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!parse_count(fields[imps_index], s.impressions) || !parse_count(fields[clicks_index], s.clicks) ||
        !Money::parse(fields[cost_index], s.cost)) {
      throw DataError(where + ": malformed number");
    }
    try {
      s.validate();
    } catch (const std::invalid_argument& e) {
      throw DataError(where + ": " + e.what());
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace bidrec::aggregate
