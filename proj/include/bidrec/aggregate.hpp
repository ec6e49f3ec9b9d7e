#pragma once

#include <cstddef>
#include <istream>
#include <ostream>
#include <span>
#include <unordered_map>
#include <vector>

#include "bidrec/domain.hpp"
#include "bidrec/ingest.hpp"

namespace bidrec::aggregate {

enum class OutlierMetric { Impressions, Ctr };

struct AggregationConfig {
  double outlier_sigma = 2.0;
  OutlierMetric outlier_metric = OutlierMetric::Impressions;
  /// Key fields kept when grouping; the others collapse to a wildcard.
  std::vector<FeatureField> grouping_fields = all_feature_fields();

  /// Throws ConfigError on sigma <= 0 or an empty field list.
  void validate() const;
};

/// Order-independent fold of events into per-key totals. Counts and costs are
/// exact, so any split and merge of the input gives identical results.
class Aggregator {
 public:
  explicit Aggregator(std::span<const FeatureField> grouping_fields = all_feature_fields());

  void add(const ingest::FeatureEvent& event);
  void add(const FeatureStats& stats);
  void merge(const Aggregator& other);

  [[nodiscard]] std::size_t size() const { return groups_.size(); }
  /// Totals sorted by key.
  [[nodiscard]] std::vector<FeatureStats> finish() const;

 private:
  [[nodiscard]] FeatureCombination project(const FeatureCombination& key) const;

  std::vector<FeatureField> fields_;
  bool project_ = false;
  std::unordered_map<FeatureCombination, FeatureStats> groups_;
};

/// Groups events by their key projected onto config.grouping_fields. The
/// input is cut into `partitions` contiguous slices folded on up to `threads`
/// threads; the result does not depend on either.
std::vector<FeatureStats> group_stats(std::span<const ingest::FeatureEvent> events, const AggregationConfig& config,
                                      std::size_t partitions = 1, unsigned threads = 1);

/// Keeps features whose metric lies within sigma population standard
/// deviations of the mean (inclusive). Keeps everything when the deviation is 0.
std::vector<FeatureStats> remove_outliers(std::span<const FeatureStats> stats, double sigma,
                                          OutlierMetric metric = OutlierMetric::Impressions);

/// Unweighted per-feature means of impressions and clicks; prior CPM from
/// total cost over total impressions. Throws PriorUnavailable on empty input.
Prior compute_prior(std::span<const FeatureStats> stats);

/// (prior_clicks + clicks) / (prior_impressions + impressions).
double adjusted_ctr(const Prior& prior, const FeatureStats& stats);

struct AdjustedCost {
  double cost_usd = 0.0;
  double impressions = 0.0;
  double cpm_usd = 0.0;
};

/// Impression-weighted blend of the prior CPM and the feature's own CPM.
AdjustedCost adjusted_cpm(const Prior& prior, const FeatureStats& stats);

/// Both of the above, packed and validated.
AdjustedMetrics adjust(const Prior& prior, const FeatureStats& stats);

/// One row per feature: key fields, impressions, clicks, cost_usd,
/// adjusted_ctr, adjusted_cpm_usd.
void write_aggregates_csv(std::ostream& out, std::span<const FeatureStats> stats, const Prior& prior);

/// Reads key fields plus impressions, clicks and cost_usd from a file with the
/// aggregates.csv header (extra columns are ignored). Throws DataError.
std::vector<FeatureStats> read_stats_csv(std::istream& in);

}  // namespace bidrec::aggregate
