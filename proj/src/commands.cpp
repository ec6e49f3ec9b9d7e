#include "bidrec/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

#include "bidrec/aggregate.hpp"
#include "bidrec/csv.hpp"
#include "bidrec/errors.hpp"
#include "bidrec/ingest.hpp"
#include "bidrec/recommend.hpp"
#include "bidrec/simulate.hpp"

namespace bidrec::cli {
namespace {

namespace fs = std::filesystem;

/// Ordered "key: value" lines written as a plain-text run report.
class Report {
 public:
  void add(std::string key, std::string value) { lines_.emplace_back(std::move(key), std::move(value)); }
  template <typename T>
  void add(std::string key, T value) {
    std::ostringstream s;
    s << value;
    add(std::move(key), s.str());
  }
  void section(std::string title) { lines_.emplace_back("", "[" + std::move(title) + "]"); }

  void write(const fs::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& [key, value] : lines_) {
      if (key.empty()) {
        out << '\n' << value << '\n';
      } else {
        out << key << ": " << value << '\n';
      }
    }
    if (!out) throw IoError("write failed: " + path.string());
  }

 private:
  std::vector<std::pair<std::string, std::string>> lines_;
};

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void report_header(Report& report, const config::RunConfig& cfg, std::string_view command) {
  report.add("command", std::string(command));
  // Only line that varies between identical runs; omitted when --seed is given.
  if (!cfg.deterministic_mode) report.add("generated_at", utc_now());
  report.add("config_hash", cfg.config_hash());
  report.add("seed", cfg.seed);
}

std::string prior_text(const Prior& p) {
  return "clicks=" + csv::format_shortest(p.prior_clicks) + " impressions=" + csv::format_shortest(p.prior_impressions) +
         " cpm_usd=" + csv::format_shortest(p.prior_cpm_usd);
}

void require_file(const fs::path& path, std::string_view what) {
  if (path.empty()) throw ConfigError(std::string(what) + " path is not set");
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw ConfigError(std::string(what) + " file does not exist: " + path.string());
}

void prepare_output_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir, ec)) throw IoError("cannot create output directory " + dir.string());
}

std::string file_safe(std::string_view text) {
  std::string out;
  for (char c : text) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out.push_back(ok ? c : '_');
  }
  return out;
}

/// Result of streaming both feeds through the network and campaign folds.
struct IngestedFeeds {
  explicit IngestedFeeds(std::span<const FeatureField> fields) : network(fields), campaign(fields) {}

  aggregate::Aggregator network;
  aggregate::Aggregator campaign;
  std::size_t impressions_accepted = 0;
  std::size_t clicks_accepted = 0;
  std::vector<ingest::RejectRecord> impression_rejects;
  std::vector<ingest::RejectRecord> click_rejects;
  std::optional<ingest::Timestamp> newest;
};

IngestedFeeds ingest_feeds(const config::RunConfig& cfg) {
  require_file(cfg.impressions_path, "impressions");
  if (!cfg.clicks_path.empty()) require_file(cfg.clicks_path, "clicks");

  IngestedFeeds feeds(cfg.aggregation.grouping_fields);

  ingest::IngestOptions options;
  options.window_start = cfg.window_start;
  options.window_end = cfg.window_end;
  options.geo_allowlist = cfg.geo_allowlist;
  options.threads = cfg.threads;

  auto sink = [&](std::span<const ingest::RawEventRow> rows) {
    for (const auto& row : rows) {
      if (!feeds.newest || row.timestamp > *feeds.newest) feeds.newest = row.timestamp;
    }
    if (cfg.campaign_id.empty()) {
      for (const auto& row : rows) feeds.network.add(ingest::derive_features(row));
      return;
    }
    const auto split = ingest::split_network_campaign(rows, cfg.campaign_id);
    for (const auto& row : split.network) feeds.network.add(ingest::derive_features(row));
    for (const auto& row : split.campaign) feeds.campaign.add(ingest::derive_features(row));
  };

  auto parse = [&](const fs::path& path, bool clicks, std::size_t& accepted, std::vector<ingest::RejectRecord>& rejects) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    options.require_click = clicks;
    auto summary = ingest::parse_feed_streaming(in, cfg.schema, options, sink);
    accepted = summary.accepted;
    rejects = std::move(summary.rejects);
  };

  parse(cfg.impressions_path, false, feeds.impressions_accepted, feeds.impression_rejects);
  if (!cfg.clicks_path.empty()) parse(cfg.clicks_path, true, feeds.clicks_accepted, feeds.click_rejects);

  if (feeds.impressions_accepted + feeds.clicks_accepted == 0) throw DataError("no rows accepted from the input feeds");
  return feeds;
}

void write_rejects_file(const fs::path& path, const IngestedFeeds& feeds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "row_number,reason,feed\n";
  ingest::write_rejects(out, feeds.impression_rejects, "impressions");
  ingest::write_rejects(out, feeds.click_rejects, "clicks");
  if (!out) throw IoError("write failed: " + path.string());
}

void report_ingest(Report& report, const IngestedFeeds& feeds) {
  report.add("impression_rows_accepted", feeds.impressions_accepted);
  report.add("impression_rows_rejected", feeds.impression_rejects.size());
  report.add("click_rows_accepted", feeds.clicks_accepted);
  report.add("click_rows_rejected", feeds.click_rejects.size());
  std::map<std::string, std::size_t> by_reason;
  for (const auto& r : feeds.impression_rejects) ++by_reason[std::string(ingest::to_string(r.reason))];
  for (const auto& r : feeds.click_rejects) ++by_reason[std::string(ingest::to_string(r.reason))];
  for (const auto& [reason, count] : by_reason) report.add("rejected." + reason, count);
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  body(out);
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

CommandResult cmd_recommend(const config::RunConfig& cfg) {
  cfg.validate();
  if (cfg.campaign_id.empty()) throw ConfigError("campaign id is required (--campaign-id)");
  if (!cfg.target_cpc_usd) throw ConfigError("target CPC is required (--target-cpc)");
  if (!cfg.requested_scale) throw ConfigError("requested scale is required (--requested-scale)");
  prepare_output_dir(cfg.output_dir);

  CommandResult result;
  Report report;
  report_header(report, cfg, "recommend");
  report.add("campaign_id", cfg.campaign_id);

  IngestedFeeds feeds = ingest_feeds(cfg);
  write_rejects_file(cfg.output_dir / "rejects.csv", feeds);
  report_ingest(report, feeds);

  const auto network_all = feeds.network.finish();
  const auto network = aggregate::remove_outliers(network_all, cfg.aggregation.outlier_sigma, cfg.aggregation.outlier_metric);
  if (network.empty()) throw DataError("no network features left after outlier removal");
  const Prior network_prior = aggregate::compute_prior(network);

  const auto campaign = feeds.campaign.finish();
  const bool cold_start = campaign.empty();
  const Prior campaign_prior = cold_start ? network_prior : aggregate::compute_prior(campaign);
  if (cold_start) {
    result.warnings.push_back("campaign " + cfg.campaign_id + " has no history: network features only, network prior used");
  }

  report.add("network_features", network_all.size());
  report.add("network_outliers_removed", network_all.size() - network.size());
  report.add("network_prior", prior_text(network_prior));
  report.add("campaign_features", campaign.size());
  report.add("campaign_prior", prior_text(campaign_prior) + (cold_start ? " (network fallback)" : ""));

  const std::string date = !cfg.run_date.empty() ? cfg.run_date : ingest::format_timestamp(*feeds.newest).substr(0, 10);
  const std::uint64_t scale = *cfg.requested_scale;
  recommend::MergeConfig merge_cfg = cfg.merge;
  merge_cfg.requested_scale = scale;

  for (double fraction : cfg.optimization_fractions) {
    const auto policy = cfg.policy(fraction);
    const auto network_recs =
        recommend::build_recommendations(network, network_prior, policy, Source::Network, cfg.campaign_id);
    const auto selection = recommend::select_network_features(network_recs, cfg.merge.top_impression_budget);
    const auto campaign_recs =
        recommend::build_recommendations(campaign, campaign_prior, policy, Source::Campaign, cfg.campaign_id);
    const auto merged = recommend::merge_recommendations(selection.recs, campaign_recs, merge_cfg);

    std::string name = "recommendations_" + file_safe(cfg.campaign_id) + "_" + file_safe(date);
    if (cfg.optimization_fractions.size() > 1) name += "_f" + csv::format_shortest(fraction);
    const fs::path path = cfg.output_dir / (name + ".csv");
    recommend::export_recommendations(merged.recs, path);
    result.outputs.push_back(path);

    report.section("optimization_fraction " + csv::format_shortest(fraction));
    report.add("optimization_fraction", csv::format_shortest(fraction));
    report.add("target_cpc_usd", csv::format_shortest(policy.target_cpc_usd));
    report.add("output", path.filename().string());
    report.add("network_top_selected", selection.recs.size());
    report.add("network_top_impressions", selection.impressions);
    report.add("network_recommendations", merged.network_count);
    report.add("campaign_recommendations", merged.campaign_count);
    report.add("collisions_resolved_to_campaign", merged.collisions);
    report.add("requested_scale", scale);
    report.add("network_scale_target", csv::format_shortest(merged.network_target));
    report.add("network_scale_covered", merged.network_impressions);
    if (selection.budget_unmet) {
      result.warnings.push_back("network feed holds fewer than " + std::to_string(cfg.merge.top_impression_budget) +
                                " impressions; all network features kept");
    }
    if (!merged.network_target_met) {
      result.warnings.push_back("network features cover less than the network share of the requested scale");
    }
  }

  std::sort(result.warnings.begin(), result.warnings.end());
  result.warnings.erase(std::unique(result.warnings.begin(), result.warnings.end()), result.warnings.end());
  report.section("warnings");
  report.add("count", result.warnings.size());
  for (const auto& w : result.warnings) report.add("warning", w);

  result.report = cfg.output_dir / "run_report.txt";
  report.write(result.report);
  return result;
}

CommandResult cmd_aggregate(const config::RunConfig& cfg) {
  cfg.validate();
  prepare_output_dir(cfg.output_dir);
  CommandResult result;
  Report report;
  report_header(report, cfg, "aggregate");

  IngestedFeeds feeds = ingest_feeds(cfg);
  write_rejects_file(cfg.output_dir / "rejects.csv", feeds);
  report_ingest(report, feeds);

  const auto network_all = feeds.network.finish();
  const auto network = aggregate::remove_outliers(network_all, cfg.aggregation.outlier_sigma, cfg.aggregation.outlier_metric);
  if (network.empty()) throw DataError("no network features left after outlier removal");
  const Prior prior = aggregate::compute_prior(network);
  const fs::path path = cfg.output_dir / "aggregates.csv";
  write_file(path, [&](std::ostream& out) { aggregate::write_aggregates_csv(out, network, prior); });
  result.outputs.push_back(path);
  report.add("network_features", network_all.size());
  report.add("network_outliers_removed", network_all.size() - network.size());
  report.add("network_prior", prior_text(prior));

  if (!cfg.campaign_id.empty()) {
    const auto campaign = feeds.campaign.finish();
    report.add("campaign_id", cfg.campaign_id);
    report.add("campaign_features", campaign.size());
    if (!campaign.empty()) {
      const Prior campaign_prior = aggregate::compute_prior(campaign);
      const fs::path cpath = cfg.output_dir / "aggregates_campaign.csv";
      write_file(cpath, [&](std::ostream& out) { aggregate::write_aggregates_csv(out, campaign, campaign_prior); });
      result.outputs.push_back(cpath);
      report.add("campaign_prior", prior_text(campaign_prior));
    } else {
      result.warnings.push_back("campaign " + cfg.campaign_id + " has no history");
    }
  }
  result.report = cfg.output_dir / "run_report.txt";
  report.write(result.report);
  return result;
}

CommandResult cmd_simulate(const config::RunConfig& cfg) {
  cfg.validate();
  if (!cfg.target_cpc_usd) throw ConfigError("target CPC is required (--target-cpc)");
  prepare_output_dir(cfg.output_dir);
  CommandResult result;

  simulate::MarketModel market;
  if (!cfg.market_path.empty()) {
    require_file(cfg.market_path, "market");
    std::ifstream in(cfg.market_path, std::ios::binary);
    market = simulate::read_market_csv(in);
  } else if (cfg.synthetic_features > 0) {
    simulate::SyntheticMarketSpec spec;
    spec.features = cfg.synthetic_features;
    spec.seed = cfg.seed;
    market = simulate::make_synthetic_market(spec);
    const fs::path path = cfg.output_dir / "market.csv";
    write_file(path, [&](std::ostream& out) { simulate::write_market_csv(out, market); });
    result.outputs.push_back(path);
  } else {
    throw ConfigError("simulate needs a market file (--market) or simulate.synthetic_features");
  }
  if (market.features.empty()) throw DataError("market has no features");

  std::vector<FeatureStats> history;
  if (!cfg.history_path.empty()) {
    require_file(cfg.history_path, "history");
    std::ifstream in(cfg.history_path, std::ios::binary);
    history = aggregate::read_stats_csv(in);
  } else if (cfg.history_impressions > 0) {
    history = simulate::observe_history(market, cfg.history_impressions, cfg.seed);
  }
  if (history.empty() && !cfg.simulation_prior) {
    throw ConfigError("simulate needs initial history or an explicit prior (simulate.prior_clicks / prior_impressions)");
  }

  simulate::FeedbackConfig feedback;
  feedback.policy = cfg.policy(cfg.optimization_fractions.front());
  feedback.prior = cfg.simulation_prior;
  feedback.prior_mode = cfg.prior_mode;
  feedback.weeks = cfg.weeks;
  feedback.seed = cfg.seed;
  if (!cfg.campaign_id.empty()) feedback.campaign_id = cfg.campaign_id;

  const auto cmp = simulate::compare_with_baseline(market, history, feedback);

  const fs::path trajectory = cfg.output_dir / "trajectory.csv";
  write_file(trajectory, [&](std::ostream& out) { simulate::write_trajectory_csv(out, cmp.recommended); });
  const fs::path baseline = cfg.output_dir / "trajectory_baseline.csv";
  write_file(baseline, [&](std::ostream& out) { simulate::write_trajectory_csv(out, cmp.baseline); });
  result.outputs.push_back(trajectory);
  result.outputs.push_back(baseline);

  const fs::path comparison = cfg.output_dir / "comparison.csv";
  write_file(comparison, [&](std::ostream& out) {
    out << "week,arm,impressions,clicks,cost_usd,ctr,cpc_usd,cpm_usd\n";
    auto row = [&](std::size_t week, std::string_view arm, const simulate::WeeklyOutcome& o) {
      out << week + 1 << ',' << arm << ',' << o.impressions << ',' << o.clicks << ',' << o.cost.to_string() << ','
          << csv::format_shortest(o.ctr()) << ',' << (o.clicks ? csv::format_shortest(o.cpc()) : "inf") << ','
          << csv::format_shortest(o.cpm()) << '\n';
    };
    for (std::size_t w = 0; w < cmp.recommended.size(); ++w) {
      row(w, "recommended", cmp.recommended[w].outcome);
      row(w, "baseline", cmp.baseline[w].outcome);
    }
  });
  result.outputs.push_back(comparison);

  Report report;
  report_header(report, cfg, "simulate");
  report.add("generator", std::string(simulate::kGeneratorName));
  report.add("market_features", market.features.size());
  report.add("history_features", history.size());
  report.add("weeks", cfg.weeks);
  report.add("prior_mode", cfg.prior_mode == simulate::PriorMode::Frozen ? "frozen" : "recompute");
  report.add("prior", prior_text(cmp.recommended.front().prior));
  report.add("optimization_fraction", csv::format_shortest(feedback.policy.optimization_fraction));
  report.add("target_cpc_usd", csv::format_shortest(feedback.policy.target_cpc_usd));
  report.add("baseline_flat_cpm_usd", csv::format_shortest(cmp.flat_bid_cpm_usd));
  const auto& rec_final = cmp.recommended.back().outcome;
  const auto& base_final = cmp.baseline.back().outcome;
  report.add("final_recommended_cpc_usd", rec_final.clicks ? csv::format_shortest(rec_final.cpc()) : "inf");
  report.add("final_baseline_cpc_usd", base_final.clicks ? csv::format_shortest(base_final.cpc()) : "inf");
  report.add("final_recommended_spend_usd", rec_final.cost.to_string());
  report.add("final_baseline_spend_usd", base_final.cost.to_string());
  report.add("final_cpc_improvement", csv::format_fixed_half_even(cmp.final_cpc_improvement, 4));
  result.report = cfg.output_dir / "run_report.txt";
  report.write(result.report);
  return result;
}

CommandResult cmd_validate_config(const config::RunConfig& cfg) {
  cfg.validate();
  if (!cfg.impressions_path.empty()) require_file(cfg.impressions_path, "impressions");
  if (!cfg.clicks_path.empty()) require_file(cfg.clicks_path, "clicks");
  if (!cfg.market_path.empty()) require_file(cfg.market_path, "market");
  if (!cfg.history_path.empty()) require_file(cfg.history_path, "history");
  return {};
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const IoError*>(&e)) return kExitConfig;
  if (dynamic_cast<const DataError*>(&e)) return kExitData;
  return kExitInternal;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bid recommendations from impression and click logs", "bidrec"};
  app.require_subcommand(1);

  struct Flags {
    std::string config;
    std::optional<std::string> campaign_id;
    std::optional<double> target_cpc;
    std::vector<double> fractions;
    std::optional<std::uint64_t> requested_scale;
    std::optional<double> network_fraction;
    std::optional<std::uint64_t> top_impressions;
    std::optional<double> outlier_sigma;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::string> out_dir;
    std::optional<std::string> market;
    std::optional<std::size_t> weeks;
  } flags;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", flags.config, "Config file (key = value with [sections])");
    cmd->add_option("--campaign-id", flags.campaign_id, "Insertion order id of the campaign");
    cmd->add_option("--target-cpc", flags.target_cpc, "Target cost per click, USD");
    cmd->add_option("--optimization-fraction", flags.fractions, "Bid multiplier in (0, 1]; repeat for A/B outputs");
    cmd->add_option("--requested-scale", flags.requested_scale, "Requested weekly impressions");
    cmd->add_option("--network-fraction", flags.network_fraction, "Share of scale served from network features");
    cmd->add_option("--top-impressions", flags.top_impressions, "Impression budget for top network features");
    cmd->add_option("--outlier-sigma", flags.outlier_sigma, "Outlier cut in standard deviations");
    cmd->add_option("--seed", flags.seed, "Random seed; also suppresses report timestamps");
    cmd->add_option("--threads", flags.threads, "Worker threads (0 = auto)");
    cmd->add_option("--out", flags.out_dir, "Output directory");
  };

  auto* recommend_cmd = app.add_subcommand("recommend", "Produce the recommendation file for one campaign");
  auto* simulate_cmd = app.add_subcommand("simulate", "Replay the feedback loop against a synthetic market");
  auto* aggregate_cmd = app.add_subcommand("aggregate", "Dump grouped statistics (aggregates.csv)");
  auto* validate_cmd = app.add_subcommand("validate-config", "Check a config file and its input paths");
  for (auto* cmd : {recommend_cmd, simulate_cmd, aggregate_cmd, validate_cmd}) add_common(cmd);
  simulate_cmd->add_option("--market", flags.market, "Market definition CSV");
  simulate_cmd->add_option("--weeks", flags.weeks, "Pipeline iterations to simulate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    config::RunConfig cfg = flags.config.empty() ? config::RunConfig{} : config::load_file(flags.config);
    if (flags.campaign_id) cfg.campaign_id = *flags.campaign_id;
    if (flags.target_cpc) cfg.target_cpc_usd = *flags.target_cpc;
    if (!flags.fractions.empty()) cfg.optimization_fractions = flags.fractions;
    if (flags.requested_scale) cfg.requested_scale = *flags.requested_scale;
    if (flags.network_fraction) cfg.merge.network_scale_fraction = *flags.network_fraction;
    if (flags.top_impressions) cfg.merge.top_impression_budget = *flags.top_impressions;
    if (flags.outlier_sigma) cfg.aggregation.outlier_sigma = *flags.outlier_sigma;
    if (flags.seed) {
      cfg.seed = *flags.seed;
      cfg.deterministic_mode = true;
    }
    if (flags.threads) cfg.threads = *flags.threads;
    if (flags.out_dir) cfg.output_dir = *flags.out_dir;
    if (flags.market) cfg.market_path = *flags.market;
    if (flags.weeks) cfg.weeks = *flags.weeks;

    CommandResult result;
    if (recommend_cmd->parsed()) {
      result = cmd_recommend(cfg);
    } else if (simulate_cmd->parsed()) {
      result = cmd_simulate(cfg);
    } else if (aggregate_cmd->parsed()) {
      result = cmd_aggregate(cfg);
    } else {
      result = cmd_validate_config(cfg);
      out << "config ok (hash " << cfg.config_hash() << ")\n";
    }
    for (const auto& path : result.outputs) out << "wrote " << path.string() << '\n';
    if (!result.report.empty()) out << "report " << result.report.string() << '\n';
    for (const auto& w : result.warnings) err << "warning: " << w << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

}  // namespace bidrec::cli
