#include "bidrec/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bidrec/csv.hpp"
#include "bidrec/errors.hpp"

namespace bidrec::config {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::filesystem::path resolve(const std::filesystem::path& base_dir, std::string_view value) {
  std::filesystem::path p{std::string(value)};
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

ingest::Timestamp parse_time(std::string_view text, std::string_view what) {
  const auto ts = ingest::parse_timestamp(text);
  if (!ts) throw ConfigError(std::string(what) + ": invalid timestamp '" + std::string(text) + "'");
  return *ts;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

}  // namespace

Entries parse_entries(std::string_view text) {
  Entries entries;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    const auto comment = line.find_first_of("#;");
    if (comment != std::string_view::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config line " + std::to_string(line_no) + ": malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    entries[full] = std::string(trim(line.substr(eq + 1)));
  }
  return entries;
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    const auto item = trim(text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

double parse_double(std::string_view text, std::string_view what) {
  text = trim(text);
  double value = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !std::isfinite(value)) {
    throw ConfigError(std::string(what) + ": expected a number, got '" + std::string(text) + "'");
  }
  return value;
}

std::uint64_t parse_count(std::string_view text, std::string_view what) {
  text = trim(text);
  std::uint64_t value = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError(std::string(what) + ": expected a non-negative integer, got '" + std::string(text) + "'");
  }
  return value;
}

bidder::BidPolicy RunConfig::policy(double optimization_fraction) const {
  bidder::BidPolicy p;
  if (!target_cpc_usd) throw ConfigError("target_cpc is required");
  p.target_cpc_usd = *target_cpc_usd;
  p.optimization_fraction = optimization_fraction;
  p.min_bid_cpm_usd = min_bid_cpm_usd;
  p.max_bid_cpm_usd = max_bid_cpm_usd;
  return p;
}

void RunConfig::validate() const {
  aggregation.validate();
  merge.validate();
  if (optimization_fractions.empty()) throw ConfigError("at least one optimization_fraction is required");
  if (target_cpc_usd) {
    for (double f : optimization_fractions) policy(f).validate();
  }
  if (window_start && window_end && !(*window_start < *window_end)) throw ConfigError("window_start must precede window_end");
  if (weeks < 1) throw ConfigError("weeks must be at least 1");
}

std::string RunConfig::canonical() const {
  std::ostringstream out;
  auto line = [&](std::string_view key, const auto& value) { out << key << '=' << value << '\n'; };
  auto num = [](double v) { return csv::format_shortest(v); };
  line("paths.impressions", impressions_path.generic_string());
  line("paths.clicks", clicks_path.generic_string());
  line("paths.market", market_path.generic_string());
  line("paths.history", history_path.generic_string());
  line("campaign.id", campaign_id);
  line("campaign.date", run_date);
  for (std::size_t c = 0; c < ingest::kColumnCount; ++c) {
    line("schema." + std::string(ingest::kColumnNames[c]), schema.header(static_cast<ingest::Column>(c)));
  }
  line("ingest.geo_allowlist", join(geo_allowlist));
  line("ingest.window_start", window_start ? ingest::format_timestamp(*window_start) : "");
  line("ingest.window_end", window_end ? ingest::format_timestamp(*window_end) : "");
  line("aggregate.outlier_sigma", num(aggregation.outlier_sigma));
  line("aggregate.outlier_metric", aggregation.outlier_metric == aggregate::OutlierMetric::Impressions ? "impressions" : "ctr");
  std::vector<std::string> fields;
  for (auto f : aggregation.grouping_fields) fields.emplace_back(to_string(f));
  line("aggregate.grouping_fields", join(fields));
  line("bid.target_cpc", target_cpc_usd ? num(*target_cpc_usd) : "");
  std::vector<std::string> fractions;
  for (double f : optimization_fractions) fractions.push_back(num(f));
  line("bid.optimization_fraction", join(fractions));
  line("bid.min_bid_cpm", num(min_bid_cpm_usd));
  line("bid.max_bid_cpm", num(max_bid_cpm_usd));
  line("merge.network_fraction", num(merge.network_scale_fraction));
  line("merge.top_impressions", merge.top_impression_budget);
  line("merge.requested_scale", requested_scale ? std::to_string(*requested_scale) : "");
  line("simulate.weeks", weeks);
  line("simulate.prior_mode", prior_mode == simulate::PriorMode::Frozen ? "frozen" : "recompute");
  line("simulate.prior", simulation_prior ? num(simulation_prior->prior_clicks) + "/" + num(simulation_prior->prior_impressions) +
                                                "/" + num(simulation_prior->prior_cpm_usd)
                                          : "");
  line("simulate.synthetic_features", synthetic_features);
  line("simulate.history_impressions", history_impressions);
  line("run.seed", seed);
  return out.str();
}

std::string RunConfig::config_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void apply_entries(RunConfig& cfg, const Entries& entries, const std::filesystem::path& base_dir) {
  std::optional<double> prior_clicks, prior_imps, prior_cpm;
  for (const auto& [key, value] : entries) {
    if (key == "paths.impressions") {
      cfg.impressions_path = resolve(base_dir, value);
    } else if (key == "paths.clicks") {
      cfg.clicks_path = resolve(base_dir, value);
    } else if (key == "paths.out") {
      cfg.output_dir = resolve(base_dir, value);
    } else if (key == "paths.market") {
      cfg.market_path = resolve(base_dir, value);
    } else if (key == "paths.history") {
      cfg.history_path = resolve(base_dir, value);
    } else if (key == "campaign.id") {
      cfg.campaign_id = value;
    } else if (key == "campaign.date") {
      cfg.run_date = value;
    } else if (key.starts_with("schema.")) {
      cfg.schema.set(ingest::parse_column(std::string_view(key).substr(7)), value);
    } else if (key == "ingest.geo_allowlist") {
      cfg.geo_allowlist = split_list(value);
    } else if (key == "ingest.window_start") {
      cfg.window_start = value.empty() ? std::nullopt : std::optional(parse_time(value, key));
    } else if (key == "ingest.window_end") {
      cfg.window_end = value.empty() ? std::nullopt : std::optional(parse_time(value, key));
    } else if (key == "ingest.threads" || key == "run.threads") {
      cfg.threads = static_cast<unsigned>(parse_count(value, key));
    } else if (key == "aggregate.outlier_sigma") {
      cfg.aggregation.outlier_sigma = parse_double(value, key);
    } else if (key == "aggregate.outlier_metric") {
      if (value == "impressions") {
        cfg.aggregation.outlier_metric = aggregate::OutlierMetric::Impressions;
      } else if (value == "ctr") {
        cfg.aggregation.outlier_metric = aggregate::OutlierMetric::Ctr;
      } else {
        throw ConfigError(key + ": expected 'impressions' or 'ctr'");
      }
    } else if (key == "aggregate.grouping_fields") {
      cfg.aggregation.grouping_fields.clear();
      for (const auto& name : split_list(value)) cfg.aggregation.grouping_fields.push_back(parse_feature_field(name));
    } else if (key == "bid.target_cpc") {
      cfg.target_cpc_usd = parse_double(value, key);
    } else if (key == "bid.optimization_fraction") {
      cfg.optimization_fractions.clear();
      for (const auto& item : split_list(value)) cfg.optimization_fractions.push_back(parse_double(item, key));
    } else if (key == "bid.min_bid_cpm") {
      cfg.min_bid_cpm_usd = parse_double(value, key);
    } else if (key == "bid.max_bid_cpm") {
      cfg.max_bid_cpm_usd = parse_double(value, key);
    } else if (key == "merge.network_fraction") {
      cfg.merge.network_scale_fraction = parse_double(value, key);
    } else if (key == "merge.top_impressions") {
      cfg.merge.top_impression_budget = parse_count(value, key);
    } else if (key == "merge.requested_scale") {
      cfg.requested_scale = parse_count(value, key);
    } else if (key == "simulate.weeks") {
      cfg.weeks = parse_count(value, key);
    } else if (key == "simulate.prior_mode") {
      if (value == "frozen") {
        cfg.prior_mode = simulate::PriorMode::Frozen;
      } else if (value == "recompute") {
        cfg.prior_mode = simulate::PriorMode::Recompute;
      } else {
        throw ConfigError(key + ": expected 'frozen' or 'recompute'");
      }
    } else if (key == "simulate.prior_clicks") {
      prior_clicks = parse_double(value, key);
    } else if (key == "simulate.prior_impressions") {
      prior_imps = parse_double(value, key);
    } else if (key == "simulate.prior_cpm") {
      prior_cpm = parse_double(value, key);
    } else if (key == "simulate.synthetic_features") {
      cfg.synthetic_features = parse_count(value, key);
    } else if (key == "simulate.history_impressions") {
      cfg.history_impressions = parse_count(value, key);
    } else if (key == "simulate.seed" || key == "run.seed") {
      cfg.seed = parse_count(value, key);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }

  if (prior_clicks || prior_imps || prior_cpm) {
    if (!(prior_clicks && prior_imps)) throw ConfigError("simulate.prior_clicks and simulate.prior_impressions go together");
    try {
      cfg.simulation_prior = Prior::make(*prior_clicks, *prior_imps, prior_cpm.value_or(0.0));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("simulation prior: ") + e.what());
    }
  }
}

RunConfig load_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  RunConfig cfg;
  apply_entries(cfg, parse_entries(text.str()), path.parent_path());
  return cfg;
}

}  // namespace bidrec::config
