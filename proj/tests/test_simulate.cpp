#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "bidrec/errors.hpp"
#include "bidrec/simulate.hpp"

using namespace bidrec;
using namespace bidrec::simulate;

namespace {

// Clicks for seed 2026 from the reference run of this generator.
constexpr std::uint64_t kPinnedHalfCtrClicks = 514;

MarketFeature feature(const std::string& site, double ctr, double clearing, std::uint64_t opportunities) {
  MarketFeature f;
  f.key.site_domain = site;
  f.true_ctr = ctr;
  f.clearing_cpm_usd = clearing;
  f.weekly_opportunities = opportunities;
  return f;
}

std::vector<BidRecommendation> flat(const MarketModel& m, double bid) { return baseline_uniform_bidder(m, bid); }

}  // namespace

TEST_CASE("bids below clearing win nothing") {
  MarketModel m{{feature("a", 0.01, 2.0, 1000), feature("b", 0.01, 3.0, 1000)}};
  const auto out = simulate_week(m, flat(m, 1.0), 1);
  CHECK(out.impressions == 0);
  CHECK(out.cost.zero());
  CHECK(std::isinf(out.cpc()));
}

TEST_CASE("zero-ctr feature delivers without clicks") {
  MarketModel m{{feature("a", 0.0, 1.5, 10000)}};
  const auto out = simulate_week(m, flat(m, 2.0), 3);
  CHECK(out.impressions == 10000);
  CHECK(out.clicks == 0);
  CHECK(out.cost.usd() == doctest::Approx(10 * 1.5).epsilon(1e-12));
}

TEST_CASE("binomial draw at ctr 0.5 is concentrated and reproducible") {
  MarketModel m{{feature("half", 0.5, 1.0, 1000)}};
  const auto a = simulate_week(m, flat(m, 1.0), 2026);
  const auto b = simulate_week(m, flat(m, 1.0), 2026);
  CHECK(a.clicks >= 400);
  CHECK(a.clicks <= 600);
  CHECK(a.clicks == b.clicks);
  CHECK(a.clicks == kPinnedHalfCtrClicks);
}

TEST_CASE("binomial sampler moments") {
  std::mt19937_64 rng(17);
  for (double p : {0.001, 0.03, 0.3, 0.7, 0.999}) {
    const std::uint64_t n = 2000;
    double sum = 0, sq = 0;
    const int trials = 4000;
    for (int i = 0; i < trials; ++i) {
      const auto x = static_cast<double>(sample_binomial(n, p, rng));
      sum += x;
      sq += x * x;
    }
    const double mean = sum / trials;
    const double var = sq / trials - mean * mean;
    CAPTURE(p);
    CHECK(mean == doctest::Approx(n * p).epsilon(0.02).scale(1));
    CHECK(var == doctest::Approx(n * p * (1 - p)).epsilon(0.1).scale(1));
  }
  CHECK(sample_binomial(100, 0.0, rng) == 0);
  CHECK(sample_binomial(100, 1.0, rng) == 100);
  CHECK(sample_binomial(0, 0.5, rng) == 0);
}

TEST_CASE("outcome accounting and order independence") {
  auto market = make_synthetic_market({});
  const auto bids = flat(market, 2.0);
  const auto out = simulate_week(market, bids, 5);
  std::uint64_t imps = 0, clicks = 0;
  Money cost;
  for (const auto& f : out.features) {
    imps += f.impressions_won;
    clicks += f.clicks;
    cost += f.cost;
    CHECK(f.clicks <= f.impressions_won);
  }
  CHECK(imps == out.impressions);
  CHECK(clicks == out.clicks);
  CHECK(cost == out.cost);

  // Reversing the market or the bids does not change any feature's draw.
  MarketModel reversed{{market.features.rbegin(), market.features.rend()}};
  std::vector<BidRecommendation> rbids(bids.rbegin(), bids.rend());
  const auto again = simulate_week(reversed, rbids, 5);
  CHECK(again.clicks == out.clicks);
  CHECK(again.cost == out.cost);
}

TEST_CASE("baseline bidder") {
  MarketModel m{{feature("a", 0.01, 1.0, 100), feature("b", 0.01, 2.0, 200), feature("c", 0.01, 3.0, 300)}};
  auto bids = baseline_uniform_bidder(m, 2.0);
  REQUIRE(bids.size() == 3);
  for (const auto& b : bids) CHECK(b.bid_cpm_usd == 2.0);

  const auto zero = simulate_week(m, baseline_uniform_bidder(m, 0.0), 1);
  CHECK(zero.impressions == 0);
  const auto all = simulate_week(m, baseline_uniform_bidder(m, 3.0), 1);
  CHECK(all.impressions == 600);
  CHECK_THROWS_AS(baseline_uniform_bidder(m, -1.0), std::invalid_argument);

  CHECK(baseline_spend(m, 2.0).usd() == doctest::Approx(0.1 + 0.4));
  CHECK(tune_flat_bid(m, Money::from_usd(0.45)) == 2.0);
  CHECK(tune_flat_bid(m, Money::from_usd(0.0)) == 0.0);
  CHECK(tune_flat_bid(m, Money::from_usd(100.0)) == 3.0);
}

TEST_CASE("market validation") {
  MarketModel dup{{feature("a", 0.01, 1.0, 1), feature("a", 0.01, 1.0, 1)}};
  CHECK_THROWS_AS(dup.validate(), ConfigError);
  MarketModel hot{{feature("a", 0.2, 1.0, 1)}};
  CHECK_THROWS_AS(hot.validate(), ConfigError);
  MarketModel free{{feature("a", 0.01, 0.0, 1)}};
  CHECK_THROWS_AS(free.validate(), ConfigError);
}

TEST_CASE("feedback loop cases") {
  // Prior 1/1000; each feature observed at 100 impressions with one click.
  MarketModel m{{feature("case1", 0.0118, 0.5, 10000), feature("case2", 0.0, 0.5, 10000),
                 feature("case3", 0.02, 50.0, 10000)}};
  std::vector<FeatureStats> history;
  for (const auto& f : m.features) history.push_back(FeatureStats{f.key, 100, 1, Money::from_usd(0.05)});

  FeedbackConfig cfg;
  cfg.policy.target_cpc_usd = 1.0;
  cfg.prior = Prior::make(1, 1000, 0.5);
  cfg.weeks = 2;
  cfg.seed = 7;
  const auto t = run_feedback_loop(m, history, cfg);
  REQUIRE(t.size() == 2);
  auto bid = [&](std::size_t week, std::size_t i) { return t[week].bids[i].bid_cpm_usd; };
  CHECK(bid(1, 0) > bid(0, 0));
  CHECK(bid(1, 1) < bid(0, 1));
  CHECK(bid(1, 2) == bid(0, 2));
  CHECK(t[1].bids[1].metrics.adjusted_ctr == doctest::Approx(2.0 / 11100).epsilon(1e-12));

  // Same seed, same trajectory.
  const auto again = run_feedback_loop(m, history, cfg);
  for (std::size_t w = 0; w < 2; ++w) {
    CHECK(again[w].outcome.clicks == t[w].outcome.clicks);
    CHECK(again[w].outcome.cost == t[w].outcome.cost);
  }
}

TEST_CASE("zero-ctr feature that keeps winning has strictly falling bids") {
  MarketModel m{{feature("dud", 0.0, 0.01, 5000)}};
  FeedbackConfig cfg;
  cfg.policy.target_cpc_usd = 1.0;
  cfg.policy.min_bid_cpm_usd = 0.001;
  cfg.prior = Prior::make(1, 1000, 0.5);
  cfg.weeks = 5;
  const auto t = run_feedback_loop(m, {}, cfg);
  for (std::size_t w = 1; w < t.size(); ++w) CHECK(t[w].bids[0].bid_cpm_usd < t[w - 1].bids[0].bid_cpm_usd);
}

TEST_CASE("cold start prices every feature from the prior alone") {
  auto market = make_synthetic_market({});
  FeedbackConfig cfg;
  cfg.prior = Prior::make(1, 1000, 1.0);
  cfg.weeks = 1;
  const auto t = run_feedback_loop(market, {}, cfg);
  for (const auto& b : t[0].bids) CHECK(b.bid_cpm_usd == t[0].bids[0].bid_cpm_usd);

  FeedbackConfig no_prior;
  CHECK_THROWS_AS(run_feedback_loop(market, {}, no_prior), PriorUnavailable);
  no_prior.prior = Prior::make(1, 1000, 1.0);
  no_prior.weeks = 0;
  CHECK_THROWS_AS(run_feedback_loop(market, {}, no_prior), ConfigError);
}

TEST_CASE("recompute mode updates the prior from accumulated history") {
  auto market = make_synthetic_market({});
  const auto history = observe_history(market, 1000, 0);
  FeedbackConfig cfg;
  cfg.weeks = 3;
  cfg.prior_mode = PriorMode::Recompute;
  const auto t = run_feedback_loop(market, history, cfg);
  CHECK(t[2].prior.prior_impressions != t[0].prior.prior_impressions);
  cfg.prior_mode = PriorMode::Frozen;
  const auto f = run_feedback_loop(market, history, cfg);
  CHECK(f[2].prior.prior_impressions == f[0].prior.prior_impressions);
}

TEST_CASE("synthetic market respects its ranges and round-trips through csv") {
  SyntheticMarketSpec spec;
  spec.seed = 3;
  const auto m = make_synthetic_market(spec);
  REQUIRE(m.features.size() == 100);
  CHECK_NOTHROW(m.validate());
  for (const auto& f : m.features) {
    CHECK(f.true_ctr >= spec.ctr_min);
    CHECK(f.true_ctr <= spec.ctr_max);
    CHECK(f.clearing_cpm_usd >= spec.clearing_min_usd);
    CHECK(f.clearing_cpm_usd <= spec.clearing_max_usd);
    CHECK(f.weekly_opportunities >= spec.opportunities_min);
    CHECK(f.weekly_opportunities <= spec.opportunities_max);
  }
  std::ostringstream out;
  write_market_csv(out, m);
  std::istringstream in(out.str());
  const auto back = read_market_csv(in);
  REQUIRE(back.features.size() == m.features.size());
  for (std::size_t i = 0; i < m.features.size(); ++i) {
    CHECK(back.features[i].key == m.features[i].key);
    CHECK(back.features[i].true_ctr == m.features[i].true_ctr);
    CHECK(back.features[i].clearing_cpm_usd == m.features[i].clearing_cpm_usd);
    CHECK(back.features[i].weekly_opportunities == m.features[i].weekly_opportunities);
  }
  std::istringstream bad("nonsense\n1,2\n");
  CHECK_THROWS_AS(read_market_csv(bad), DataError);
}

TEST_CASE("seeding helpers are stable") {
  FeatureCombination k;
  k.site_domain = "x";
  CHECK(feature_seed(1, k) == feature_seed(1, k));
  CHECK(feature_seed(1, k) != feature_seed(2, k));
  CHECK(week_seed(0, 0) != week_seed(0, 1));
  CHECK(mix64(0) != 0);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = unit_uniform(rng);
    CHECK(u > 0.0);
    CHECK(u <= 1.0);
  }
}
