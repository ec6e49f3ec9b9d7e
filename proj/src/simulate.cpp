#include "bidrec/simulate.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "bidrec/aggregate.hpp"
#include "bidrec/csv.hpp"
#include "bidrec/errors.hpp"
#include "bidrec/recommend.hpp"

namespace bidrec::simulate {
namespace {

constexpr std::array<std::string_view, 3> kMarketValueColumns = {"true_ctr", "clearing_cpm_usd", "weekly_opportunities"};

Money clearing_cost(std::uint64_t impressions, double clearing_cpm_usd) {
  return Money::from_usd(static_cast<double>(impressions) * clearing_cpm_usd / 1000.0);
}

}  // namespace

void MarketModel::validate() const {
  std::set<FeatureCombination> seen;
  for (const auto& f : features) {
    if (!seen.insert(f.key).second) throw ConfigError("duplicate market feature " + f.key.canonical());
    if (!std::isfinite(f.true_ctr) || f.true_ctr < 0 || f.true_ctr > 0.05) {
      throw ConfigError("market true_ctr must be in [0, 0.05]");
    }
    if (!std::isfinite(f.clearing_cpm_usd) || f.clearing_cpm_usd <= 0) {
      throw ConfigError("market clearing_cpm_usd must be positive");
    }
  }
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t key_hash(const FeatureCombination& key) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : key.canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t feature_seed(std::uint64_t global_seed, const FeatureCombination& key) {
  return mix64(mix64(global_seed) ^ key_hash(key));
}

std::uint64_t week_seed(std::uint64_t seed, std::size_t week) { return mix64(seed + 0x5851f42d4c957f2dULL * (week + 1)); }

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;
}

std::uint64_t sample_binomial(std::uint64_t n, double p, std::mt19937_64& rng) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("binomial p must be in [0, 1]");
  if (n == 0 || p == 0.0) return 0;
  if (p == 1.0) return n;
  if (p > 0.5) return n - sample_binomial(n, 1.0 - p, rng);

  const double log_q = std::log1p(-p);
  std::uint64_t successes = 0;
  std::uint64_t position = 0;  // trials consumed so far
  for (;;) {
    const double gap = std::floor(std::log(unit_uniform(rng)) / log_q);
    if (gap >= static_cast<double>(n - position)) break;
    position += static_cast<std::uint64_t>(gap) + 1;
    ++successes;
    if (position >= n) break;
  }
  return successes;
}

double WeeklyOutcome::ctr() const {
  return impressions == 0 ? 0.0 : static_cast<double>(clicks) / static_cast<double>(impressions);
}

double WeeklyOutcome::cpc() const {
  return clicks == 0 ? std::numeric_limits<double>::infinity() : cost.usd() / static_cast<double>(clicks);
}

double WeeklyOutcome::cpm() const {
  return impressions == 0 ? 0.0 : cost.usd() / static_cast<double>(impressions) * 1000.0;
}

WeeklyOutcome simulate_week(const MarketModel& market, std::span<const BidRecommendation> bids, std::uint64_t seed) {
  std::unordered_map<FeatureCombination, const MarketFeature*> index;
  index.reserve(market.features.size());
  for (const auto& f : market.features) index.emplace(f.key, &f);

  WeeklyOutcome week;
  week.features.reserve(bids.size());
  for (const auto& bid : bids) {
    FeatureOutcome out;
    out.key = bid.key;
    out.bid_cpm_usd = bid.bid_cpm_usd;
    const auto it = index.find(bid.key);
    if (it != index.end() && bid.bid_cpm_usd >= it->second->clearing_cpm_usd) {
      const MarketFeature& f = *it->second;
      std::mt19937_64 rng(feature_seed(seed, f.key));
      out.impressions_won = f.weekly_opportunities;
      out.clicks = sample_binomial(out.impressions_won, f.true_ctr, rng);
      out.cost = clearing_cost(out.impressions_won, f.clearing_cpm_usd);
    }
    week.impressions += out.impressions_won;
    week.clicks += out.clicks;
    week.cost += out.cost;
    week.features.push_back(std::move(out));
  }
  return week;
}

std::vector<WeekRecord> run_feedback_loop(const MarketModel& market, std::span<const FeatureStats> initial_history,
                                          const FeedbackConfig& config) {
  market.validate();
  config.policy.validate();
  if (config.weeks < 1) throw ConfigError("weeks must be at least 1");

  std::unordered_map<FeatureCombination, FeatureStats> history;
  for (const auto& s : initial_history) {
    auto [it, inserted] = history.try_emplace(s.key);
    if (inserted) it->second.key = s.key;
    it->second += s;
  }

  auto history_snapshot = [&] {
    std::vector<FeatureStats> out;
    for (const auto& [key, s] : history) {
      if (s.impressions > 0) out.push_back(s);
    }
    std::sort(out.begin(), out.end(), [](const FeatureStats& a, const FeatureStats& b) { return a.key < b.key; });
    return out;
  };

  Prior prior = config.prior ? *config.prior : aggregate::compute_prior(history_snapshot());

  std::vector<WeekRecord> trajectory;
  trajectory.reserve(config.weeks);
  for (std::size_t week = 0; week < config.weeks; ++week) {
    if (config.prior_mode == PriorMode::Recompute && week > 0) {
      const auto snapshot = history_snapshot();
      if (!snapshot.empty()) prior = aggregate::compute_prior(snapshot);
    }

    std::vector<FeatureStats> current;
    current.reserve(market.features.size());
    for (const auto& f : market.features) {
      const auto it = history.find(f.key);
      if (it != history.end()) {
        current.push_back(it->second);
      } else {
        current.push_back(FeatureStats{f.key, 0, 0, Money()});
      }
    }

    WeekRecord record;
    record.week = week;
    record.prior = prior;
    record.bids = recommend::build_recommendations(current, prior, config.policy, Source::Campaign, config.campaign_id);
    record.outcome = simulate_week(market, record.bids, week_seed(config.seed, week));

    for (const auto& out : record.outcome.features) {
      if (out.impressions_won == 0) continue;
      auto [it, inserted] = history.try_emplace(out.key);
      if (inserted) it->second.key = out.key;
      it->second += FeatureStats{out.key, out.impressions_won, out.clicks, out.cost};
    }
    trajectory.push_back(std::move(record));
  }
  return trajectory;
}

std::vector<BidRecommendation> baseline_uniform_bidder(const MarketModel& market, double flat_cpm_usd) {
  if (!std::isfinite(flat_cpm_usd) || flat_cpm_usd < 0) throw std::invalid_argument("flat CPM must be non-negative");
  std::vector<BidRecommendation> bids;
  bids.reserve(market.features.size());
  for (const auto& f : market.features) {
    BidRecommendation rec;
    rec.key = f.key;
    rec.bid_cpm_usd = flat_cpm_usd;
    rec.source = Source::Campaign;
    rec.campaign_id = "baseline";
    bids.push_back(std::move(rec));
  }
  return bids;
}

std::vector<WeekRecord> run_baseline(const MarketModel& market, double flat_cpm_usd, std::size_t weeks, std::uint64_t seed) {
  market.validate();
  const auto bids = baseline_uniform_bidder(market, flat_cpm_usd);
  std::vector<WeekRecord> out;
  for (std::size_t week = 0; week < weeks; ++week) {
    WeekRecord record;
    record.week = week;
    record.bids = bids;
    record.outcome = simulate_week(market, bids, week_seed(seed, week));
    out.push_back(std::move(record));
  }
  return out;
}

Money baseline_spend(const MarketModel& market, double flat_cpm_usd) {
  Money total;
  for (const auto& f : market.features) {
    if (flat_cpm_usd >= f.clearing_cpm_usd) total += clearing_cost(f.weekly_opportunities, f.clearing_cpm_usd);
  }
  return total;
}

double tune_flat_bid(const MarketModel& market, Money target_spend) {
  std::vector<const MarketFeature*> by_price;
  for (const auto& f : market.features) by_price.push_back(&f);
  std::sort(by_price.begin(), by_price.end(), [](const MarketFeature* a, const MarketFeature* b) {
    return a->clearing_cpm_usd < b->clearing_cpm_usd;
  });

  auto distance = [&](Money spend) { return spend > target_spend ? spend - target_spend : target_spend - spend; };
  double best_bid = 0.0;
  Money best_distance = distance(Money());
  Money spend;
  for (std::size_t i = 0; i < by_price.size(); ++i) {
    spend += clearing_cost(by_price[i]->weekly_opportunities, by_price[i]->clearing_cpm_usd);
    // Equal clearing prices are won together.
    if (i + 1 < by_price.size() && by_price[i + 1]->clearing_cpm_usd == by_price[i]->clearing_cpm_usd) continue;
    if (distance(spend) < best_distance) {
      best_distance = distance(spend);
      best_bid = by_price[i]->clearing_cpm_usd;
    }
  }
  return best_bid;
}

Comparison compare_with_baseline(const MarketModel& market, std::span<const FeatureStats> initial_history,
                                 const FeedbackConfig& config) {
  Comparison cmp;
  cmp.recommended = run_feedback_loop(market, initial_history, config);
  cmp.flat_bid_cpm_usd = tune_flat_bid(market, cmp.recommended.back().outcome.cost);
  cmp.baseline = run_baseline(market, cmp.flat_bid_cpm_usd, config.weeks, config.seed);
  const double rec_cpc = cmp.recommended.back().outcome.cpc();
  const double base_cpc = cmp.baseline.back().outcome.cpc();
  cmp.final_cpc_improvement = std::isfinite(rec_cpc) && std::isfinite(base_cpc) ? 1.0 - rec_cpc / base_cpc : 0.0;
  return cmp;
}

MarketModel make_synthetic_market(const SyntheticMarketSpec& spec) {
  if (!(spec.ctr_min > 0 && spec.ctr_min <= spec.ctr_max && spec.ctr_max <= 0.05)) {
    throw ConfigError("synthetic CTR range must satisfy 0 < min <= max <= 0.05");
  }
  if (!(spec.clearing_min_usd > 0 && spec.clearing_min_usd <= spec.clearing_max_usd)) {
    throw ConfigError("synthetic clearing range must satisfy 0 < min <= max");
  }
  if (spec.opportunities_min > spec.opportunities_max) throw ConfigError("synthetic opportunity range is inverted");

  static constexpr std::array<std::string_view, 5> kSizes = {"300x250", "728x90", "160x600", "300x50", "320x50"};
  static constexpr std::array<std::string_view, 4> kOs = {"Windows", "iOS", "Android", "macOS"};
  static constexpr std::array<std::string_view, 4> kBrowsers = {"Chrome", "Safari", "Firefox", "Edge"};
  static constexpr std::array<DeviceType, 3> kDevices = {DeviceType::Desktop, DeviceType::Mobile, DeviceType::Tablet};

  std::mt19937_64 rng(mix64(spec.seed));
  const double log_min = std::log(spec.ctr_min);
  const double log_max = std::log(spec.ctr_max);
  const std::uint64_t opp_span = spec.opportunities_max - spec.opportunities_min + 1;

  MarketModel market;
  market.features.reserve(spec.features);
  for (std::size_t i = 0; i < spec.features; ++i) {
    MarketFeature f;
    char id[16];
    std::snprintf(id, sizeof id, "%04zu", i);
    f.key.site_domain = std::string("site") + id + ".example";
    f.key.device_type = kDevices[i % kDevices.size()];
    f.key.size = std::string(kSizes[i % kSizes.size()]);
    f.key.fold_position = i % 2 == 0 ? FoldPosition::Above : FoldPosition::Below;
    f.key.geo = "US-" + std::to_string(500 + i % 30);
    f.key.operating_system = std::string(kOs[i % kOs.size()]);
    f.key.browser = std::string(kBrowsers[(i / 4) % kBrowsers.size()]);
    f.key.seller_member_id = "seller" + std::to_string(i % 7);
    f.key.tag_id = std::string("tag") + id;
    f.key.publisher_id = "pub" + std::to_string(i % 11);

    f.true_ctr = std::exp(log_min + (log_max - log_min) * unit_uniform(rng));
    f.true_ctr = std::clamp(f.true_ctr, spec.ctr_min, spec.ctr_max);
    f.clearing_cpm_usd = spec.clearing_min_usd + (spec.clearing_max_usd - spec.clearing_min_usd) * unit_uniform(rng);
    f.weekly_opportunities =
        spec.opportunities_min + std::min(opp_span - 1, static_cast<std::uint64_t>(unit_uniform(rng) * static_cast<double>(opp_span)));
    market.features.push_back(std::move(f));
  }
  return market;
}

std::vector<FeatureStats> observe_history(const MarketModel& market, std::uint64_t impressions, std::uint64_t seed) {
  std::vector<FeatureStats> out;
  out.reserve(market.features.size());
  for (const auto& f : market.features) {
    std::mt19937_64 rng(feature_seed(mix64(seed ^ 0x686973746f7279ULL), f.key));
    FeatureStats s;
    s.key = f.key;
    s.impressions = impressions;
    s.clicks = sample_binomial(impressions, f.true_ctr, rng);
    s.cost = clearing_cost(impressions, f.clearing_cpm_usd);
    out.push_back(std::move(s));
  }
  return out;
}

void write_market_csv(std::ostream& out, const MarketModel& market) {
  std::vector<std::string> row(kFeatureFieldNames.begin(), kFeatureFieldNames.end());
  row.insert(row.end(), kMarketValueColumns.begin(), kMarketValueColumns.end());
  csv::write_row(out, row);
  for (const auto& f : market.features) {
    const auto key = f.key.to_fields();
    row.assign(key.begin(), key.end());
    row.push_back(csv::format_shortest(f.true_ctr));
    row.push_back(csv::format_shortest(f.clearing_cpm_usd));
    row.push_back(std::to_string(f.weekly_opportunities));
    csv::write_row(out, row);
  }
}

MarketModel read_market_csv(std::istream& in) {
  csv::Reader reader(in);
  std::vector<std::string> header;
  if (!reader.next(header)) throw DataError("market file is empty");
  auto column = [&](std::string_view name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("market file is missing column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  std::array<std::size_t, kFeatureFieldCount> key_index{};
  for (std::size_t i = 0; i < kFeatureFieldCount; ++i) key_index[i] = column(kFeatureFieldNames[i]);
  const std::size_t ctr_index = column(kMarketValueColumns[0]);
  const std::size_t clearing_index = column(kMarketValueColumns[1]);
  const std::size_t opp_index = column(kMarketValueColumns[2]);

  auto parse_double = [](const std::string& text, double& out) {
    const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    return res.ec == std::errc() && res.ptr == text.data() + text.size();
  };
  auto parse_count = [](const std::string& text, std::uint64_t& out) {
    const auto res = std::from_chars(text.data(), text.data() + text.size(), out);
    return res.ec == std::errc() && res.ptr == text.data() + text.size();
  };

  MarketModel market;
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    const std::string where = "market record " + std::to_string(reader.record_number());
    if (fields.size() != header.size()) throw DataError(where + ": wrong column count");
    std::array<std::string, kFeatureFieldCount> key_fields;
    for (std::size_t i = 0; i < kFeatureFieldCount; ++i) key_fields[i] = fields[key_index[i]];
    MarketFeature f;
    try {
      f.key = FeatureCombination::from_fields(key_fields);
    } catch (const std::invalid_argument& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!parse_double(fields[ctr_index], f.true_ctr) || !parse_double(fields[clearing_index], f.clearing_cpm_usd) ||
        !parse_count(fields[opp_index], f.weekly_opportunities)) {
      throw DataError(where + ": malformed number");
    }
    market.features.push_back(std::move(f));
  }
  try {
    market.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("market file: ") + e.what());
  }
  return market;
}

void write_trajectory_csv(std::ostream& out, std::span<const WeekRecord> trajectory) {
  std::vector<std::string> row{"week"};
  row.insert(row.end(), kFeatureFieldNames.begin(), kFeatureFieldNames.end());
  row.insert(row.end(), {"bid_cpm_usd", "impressions", "clicks", "cost_usd", "adjusted_ctr"});
  csv::write_row(out, row);
  for (const auto& record : trajectory) {
    for (std::size_t i = 0; i < record.bids.size(); ++i) {
      const auto& bid = record.bids[i];
      const auto& outcome = record.outcome.features[i];
      row.assign({std::to_string(record.week + 1)});
      const auto key = bid.key.to_fields();
      row.insert(row.end(), key.begin(), key.end());
      row.push_back(csv::format_shortest(bid.bid_cpm_usd));
      row.push_back(std::to_string(outcome.impressions_won));
      row.push_back(std::to_string(outcome.clicks));
      row.push_back(outcome.cost.to_string());
      row.push_back(csv::format_shortest(bid.metrics.adjusted_ctr));
      csv::write_row(out, row);
    }
  }
}

}  // namespace bidrec::simulate
