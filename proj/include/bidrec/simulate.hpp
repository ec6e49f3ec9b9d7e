#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bidrec/bidder.hpp"
#include "bidrec/domain.hpp"

namespace bidrec::simulate {

/// Ground truth for one piece of inventory.
struct MarketFeature {
  FeatureCombination key;
  double true_ctr = 0.0;
  /// Minimum CPM that wins the inventory; also the price paid.
  double clearing_cpm_usd = 1.0;
  std::uint64_t weekly_opportunities = 0;
};

struct MarketModel {
  std::vector<MarketFeature> features;

  /// Throws ConfigError on duplicate keys, CTR outside [0, 0.05] or a
  /// non-positive clearing price.
  void validate() const;
};

/// Name of the random algorithm, recorded in run reports.
inline constexpr std::string_view kGeneratorName = "mt19937_64/splitmix64-seeded/geometric-gap-binomial";

/// splitmix64 finaliser.
std::uint64_t mix64(std::uint64_t x);
/// 64-bit FNV-1a of the key's canonical text.
std::uint64_t key_hash(const FeatureCombination& key);
/// Seed for one feature's draws: independent of iteration order.
std::uint64_t feature_seed(std::uint64_t global_seed, const FeatureCombination& key);

/// Uniform double in (0, 1] from the top 53 bits of one draw.
double unit_uniform(std::mt19937_64& rng);

/// Binomial(n, p) by counting geometric gaps between successes; for p > 0.5
/// the complement is sampled. Portable given an IEEE-754 log().
std::uint64_t sample_binomial(std::uint64_t n, double p, std::mt19937_64& rng);

struct FeatureOutcome {
  FeatureCombination key;
  double bid_cpm_usd = 0.0;
  std::uint64_t impressions_won = 0;
  std::uint64_t clicks = 0;
  Money cost;
};

struct WeeklyOutcome {
  std::vector<FeatureOutcome> features;
  std::uint64_t impressions = 0;
  std::uint64_t clicks = 0;
  Money cost;

  [[nodiscard]] double ctr() const;
  /// Cost per click; +inf when there were no clicks.
  [[nodiscard]] double cpc() const;
  [[nodiscard]] double cpm() const;
};

/// Bids at or above the clearing price win every weekly opportunity and pay
/// the clearing price; clicks are Binomial(won, true_ctr). Bids on keys not in
/// the market win nothing.
WeeklyOutcome simulate_week(const MarketModel& market, std::span<const BidRecommendation> bids, std::uint64_t seed);

enum class PriorMode {
  /// Prior fixed for the whole run (from config or the initial history).
  Frozen,
  /// Prior recomputed from the accumulated history before every iteration.
  Recompute,
};

struct FeedbackConfig {
  bidder::BidPolicy policy;
  std::optional<Prior> prior;
  PriorMode prior_mode = PriorMode::Frozen;
  std::size_t weeks = 1;
  std::uint64_t seed = 0;
  std::string campaign_id = "simulated";
};

struct WeekRecord {
  std::size_t week = 0;
  Prior prior;
  std::vector<BidRecommendation> bids;
  WeeklyOutcome outcome;
};

/// Seed used for iteration `week` (0-based) of a run seeded with `seed`.
std::uint64_t week_seed(std::uint64_t seed, std::size_t week);

/// Repeats bid -> simulate -> fold-into-history for config.weeks iterations.
/// Every market feature is bid on each week; features without history are
/// priced from the prior alone. Throws PriorUnavailable when no prior is
/// configured and the initial history is empty.
std::vector<WeekRecord> run_feedback_loop(const MarketModel& market, std::span<const FeatureStats> initial_history,
                                          const FeedbackConfig& config);

/// Same flat CPM on every market feature. Throws std::invalid_argument if negative.
std::vector<BidRecommendation> baseline_uniform_bidder(const MarketModel& market, double flat_cpm_usd);

/// Baseline bids replayed with the same per-week seeds as run_feedback_loop().
std::vector<WeekRecord> run_baseline(const MarketModel& market, double flat_cpm_usd, std::size_t weeks, std::uint64_t seed);

/// Weekly spend of a flat bid (deterministic: it does not depend on clicks).
Money baseline_spend(const MarketModel& market, double flat_cpm_usd);

/// The flat bid (one of the clearing prices, or 0) whose weekly spend is
/// closest to `target_spend`; ties go to the lower bid.
double tune_flat_bid(const MarketModel& market, Money target_spend);

struct Comparison {
  std::vector<WeekRecord> recommended;
  std::vector<WeekRecord> baseline;
  double flat_bid_cpm_usd = 0.0;
  /// 1 - final recommended CPC / final baseline CPC.
  double final_cpc_improvement = 0.0;
};

/// Runs the feedback loop, tunes a flat baseline to the recommended arm's
/// final-week spend, and replays the baseline over the same weeks.
Comparison compare_with_baseline(const MarketModel& market, std::span<const FeatureStats> initial_history,
                                 const FeedbackConfig& config);

struct SyntheticMarketSpec {
  std::size_t features = 100;
  double ctr_min = 0.0002;
  double ctr_max = 0.005;
  double clearing_min_usd = 0.5;
  double clearing_max_usd = 3.0;
  std::uint64_t opportunities_min = 5000;
  std::uint64_t opportunities_max = 50000;
  std::uint64_t seed = 0;
};

/// CTRs log-uniform in [ctr_min, ctr_max], clearing prices and opportunity
/// counts uniform in their ranges, all drawn independently.
MarketModel make_synthetic_market(const SyntheticMarketSpec& spec);

/// One observation of every market feature at `impressions` each, with
/// binomial clicks and clearing-price cost.
std::vector<FeatureStats> observe_history(const MarketModel& market, std::uint64_t impressions, std::uint64_t seed);

void write_market_csv(std::ostream& out, const MarketModel& market);
/// Throws DataError on malformed content.
MarketModel read_market_csv(std::istream& in);

/// week, key fields, bid_cpm_usd, impressions, clicks, cost_usd, adjusted_ctr.
void write_trajectory_csv(std::ostream& out, std::span<const WeekRecord> trajectory);

}  // namespace bidrec::simulate
