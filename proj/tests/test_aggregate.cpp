#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <sstream>

#include "bidrec/aggregate.hpp"
#include "bidrec/errors.hpp"
#include "support/fixtures.hpp"

using namespace bidrec;
using namespace bidrec::aggregate;

namespace {

FeatureCombination key(int i) {
  FeatureCombination k;
  k.site_domain = "site" + std::to_string(i);
  k.size = "300x250";
  return k;
}

FeatureStats stats(int i, std::uint64_t imps, std::uint64_t clicks, double cost = 0) {
  return FeatureStats{key(i), imps, clicks, Money::from_usd(cost)};
}

std::vector<FeatureStats> with_impressions(const std::vector<std::uint64_t>& imps) {
  std::vector<FeatureStats> out;
  for (std::size_t i = 0; i < imps.size(); ++i) out.push_back(stats(static_cast<int>(i), imps[i], 0));
  return out;
}

std::vector<ingest::FeatureEvent> synthetic_events(std::size_t rows, std::uint64_t seed) {
  testing::FeedSpec spec;
  spec.rows = rows;
  spec.seed = seed;
  std::vector<ingest::FeatureEvent> events;
  for (const auto& r : testing::make_rows(spec)) events.push_back(ingest::derive_features(r));
  return events;
}

}  // namespace

TEST_CASE("group_stats sums counts and exact costs") {
  std::vector<ingest::FeatureEvent> events;
  for (const char* c : {"0.001", "0.002", "0.003"}) {
    ingest::FeatureEvent e{key(1), false, {}};
    Money::parse(c, e.cost);
    events.push_back(e);
  }
  events[1].is_click = true;
  const auto out = group_stats(events, {});
  REQUIRE(out.size() == 1);
  CHECK(out[0].impressions == 3);
  CHECK(out[0].clicks == 1);
  CHECK(out[0].cost.to_string() == "0.006000000");
  CHECK(group_stats({}, {}).empty());
}

TEST_CASE("group_stats matches a naive sequential map") {
  const auto events = synthetic_events(10000, 5);
  std::map<std::string, std::tuple<std::uint64_t, std::uint64_t, Int128>> naive;
  for (const auto& e : events) {
    auto& [imps, clicks, nanos] = naive[e.key.canonical()];
    ++imps;
    clicks += e.is_click;
    nanos += e.cost.nanos();
  }
  const auto out = group_stats(events, {}, 7, 3);
  REQUIRE(out.size() == naive.size());
  for (const auto& s : out) {
    const auto& [imps, clicks, nanos] = naive.at(s.key.canonical());
    CHECK(s.impressions == imps);
    CHECK(s.clicks == clicks);
    CHECK(s.cost.nanos() == nanos);
  }
  CHECK(std::is_sorted(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.key < b.key; }));
}

TEST_CASE("group_stats is permutation and partition invariant") {
  auto events = synthetic_events(5000, 9);
  AggregationConfig cfg;
  const auto reference = group_stats(events, cfg);
  std::mt19937_64 rng(1);
  std::shuffle(events.begin(), events.end(), rng);
  for (std::size_t parts : {1u, 2u, 5u, 16u, 6000u}) {
    const auto out = group_stats(events, cfg, parts, 4);
    REQUIRE(out.size() == reference.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK(out[i].key == reference[i].key);
      CHECK(out[i].impressions == reference[i].impressions);
      CHECK(out[i].clicks == reference[i].clicks);
      CHECK(out[i].cost == reference[i].cost);
    }
  }
}

TEST_CASE("grouping fields project the key") {
  const auto events = synthetic_events(3000, 2);
  AggregationConfig cfg;
  cfg.grouping_fields = {FeatureField::DeviceType};
  const auto out = group_stats(events, cfg);
  CHECK(out.size() == 3);
  std::uint64_t total = 0;
  for (const auto& s : out) {
    total += s.impressions;
    CHECK(s.key.site_domain == "*");
  }
  CHECK(total == 3000);
  cfg.grouping_fields.clear();
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  AggregationConfig bad;
  bad.outlier_sigma = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("aggregator merge equals a single fold") {
  const auto events = synthetic_events(2000, 4);
  Aggregator whole, left, right;
  for (std::size_t i = 0; i < events.size(); ++i) {
    whole.add(events[i]);
    (i % 3 ? left : right).add(events[i]);
  }
  right.merge(left);
  const auto a = whole.finish();
  const auto b = right.finish();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].key == b[i].key);
    CHECK(a[i].impressions == b[i].impressions);
    CHECK(a[i].cost == b[i].cost);
  }
}

TEST_CASE("outlier removal") {
  CHECK(remove_outliers(with_impressions({5, 5, 5, 5}), 2).size() == 4);
  CHECK(remove_outliers({}, 2).empty());

  // mu = 208, sigma = 396: 1000 sits exactly on the 2-sigma boundary.
  const auto boundary = remove_outliers(with_impressions({10, 10, 10, 10, 1000}), 2);
  CHECK(boundary.size() == 5);

  std::vector<std::uint64_t> imps(9, 10);
  imps.push_back(1'000'000);
  const auto cut = remove_outliers(with_impressions(imps), 2);
  REQUIRE(cut.size() == 9);
  for (const auto& s : cut) CHECK(s.impressions == 10);

  std::vector<FeatureStats> ctr_data{stats(0, 100, 1), stats(1, 100, 1), stats(2, 100, 1), stats(3, 100, 1),
                                     stats(4, 100, 1), stats(5, 100, 1), stats(6, 100, 1), stats(7, 100, 1),
                                     stats(8, 100, 1), stats(9, 100, 90)};
  CHECK(remove_outliers(ctr_data, 2, OutlierMetric::Ctr).size() == 9);
  CHECK(remove_outliers(ctr_data, 2, OutlierMetric::Impressions).size() == 10);
}

TEST_CASE("prior computation") {
  const std::vector<FeatureStats> two{stats(0, 1000, 1, 2.0), stats(1, 3000, 3, 6.0)};
  const auto p = compute_prior(two);
  CHECK(p.prior_impressions == 2000);
  CHECK(p.prior_clicks == 2);
  CHECK(p.prior_cpm_usd == doctest::Approx(2.0));

  const auto one = compute_prior(std::vector<FeatureStats>{stats(0, 1000, 1)});
  CHECK(one.prior_clicks == 1);
  CHECK(one.prior_impressions == 1000);

  CHECK(compute_prior(std::vector<FeatureStats>{stats(0, 10, 0), stats(1, 20, 0)}).prior_clicks == 0);
  CHECK_THROWS_AS(compute_prior({}), PriorUnavailable);
}

TEST_CASE("adjusted ctr examples") {
  const auto p = Prior::make(1, 1000, 0);
  CHECK(adjusted_ctr(p, stats(0, 100, 1)) == doctest::Approx(2.0 / 1100).epsilon(1e-15));
  CHECK(adjusted_ctr(Prior{}, stats(0, 100, 5)) == doctest::Approx(0.05));
  CHECK(adjusted_ctr(p, stats(0, 10100, 1)) == doctest::Approx(2.0 / 11100).epsilon(1e-15));
  CHECK_THROWS_AS(adjusted_ctr(Prior{}, stats(0, 0, 0)), DegenerateFeature);
}

TEST_CASE("adjusted cpm examples") {
  auto c = adjusted_cpm(Prior::make(0, 1000, 2.0), stats(0, 1000, 0, 1.0));
  CHECK(c.cpm_usd == doctest::Approx(1.5));
  c = adjusted_cpm(Prior::make(0, 0, 2.0), stats(0, 1000, 0, 1.0));
  CHECK(c.cpm_usd == doctest::Approx(1.0));
  c = adjusted_cpm(Prior::make(0, 2000, 3.0), stats(0, 500, 0, 0.5));
  CHECK(c.cost_usd == doctest::Approx(6.5));
  CHECK(c.impressions == 2500);
  CHECK(c.cpm_usd == doctest::Approx(2.6));
  CHECK_THROWS_AS(adjusted_cpm(Prior{}, stats(0, 0, 0)), DegenerateFeature);
}

TEST_CASE("adjusted cpm equals pooled cpm when the prior is held-out data") {
  const auto held_out = stats(0, 4000, 0, 7.0);
  const auto feature = stats(1, 1000, 0, 3.0);
  const auto prior = Prior::make(0, 4000, held_out.cpm_usd());
  CHECK(adjusted_cpm(prior, feature).cpm_usd == doctest::Approx(10.0 / 5000 * 1000).epsilon(1e-12));
}

TEST_CASE("posterior shrinkage, incremental update and monotonicity") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 2000; ++i) {
    const double pi = 1 + static_cast<double>(rng() % 5000);
    const double pc = static_cast<double>(rng() % 50);
    const auto prior = Prior::make(std::min(pc, pi), pi, 1.0);
    const std::uint64_t imps = 1 + rng() % 5000;
    const std::uint64_t clicks = rng() % (std::min<std::uint64_t>(imps, 60) + 1);
    const auto s = stats(0, imps, clicks);
    const double adj = adjusted_ctr(prior, s);
    const double raw = s.ctr();
    CHECK(adj >= std::min(raw, prior.ctr()) - 1e-15);
    CHECK(adj <= std::max(raw, prior.ctr()) + 1e-15);

    const std::uint64_t a_imps = imps / 2;
    const std::uint64_t a_clicks = std::min(clicks, a_imps);
    const auto a = stats(0, a_imps, a_clicks);
    const auto b = stats(0, imps - a_imps, clicks - a_clicks);
    const auto folded = Prior::make(prior.prior_clicks + static_cast<double>(a_clicks),
                                    prior.prior_impressions + static_cast<double>(a_imps), 1.0);
    CHECK(adjusted_ctr(folded, b) == doctest::Approx(adj).epsilon(1e-12));

    if (clicks < imps) CHECK(adjusted_ctr(prior, stats(0, imps, clicks + 1)) > adj);
    CHECK(adjusted_ctr(prior, stats(0, imps + 1, clicks)) < adj);
  }
}

TEST_CASE("aggregates.csv round-trips through read_stats_csv") {
  const auto events = synthetic_events(1500, 8);
  const auto grouped = group_stats(events, {});
  const auto prior = compute_prior(grouped);
  std::ostringstream out;
  write_aggregates_csv(out, grouped, prior);
  const std::string text = out.str();
  CHECK(text.rfind("site_domain,device_type,size,fold_position,geo,operating_system,browser,seller_member_id,tag_id,"
                   "publisher_id,impressions,clicks,cost_usd,adjusted_ctr,adjusted_cpm_usd\n",
                   0) == 0);
  std::istringstream in(text);
  const auto back = read_stats_csv(in);
  REQUIRE(back.size() == grouped.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].key == grouped[i].key);
    CHECK(back[i].impressions == grouped[i].impressions);
    CHECK(back[i].clicks == grouped[i].clicks);
    CHECK(back[i].cost == grouped[i].cost);
  }
  std::istringstream bad("site_domain,impressions\nx,1\n");
  CHECK_THROWS_AS(read_stats_csv(bad), DataError);
}
