#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "bidrec/bidder.hpp"
#include "bidrec/domain.hpp"

namespace bidrec::recommend {

struct MergeConfig {
  /// Share of the requested scale served from network-level features.
  double network_scale_fraction = 0.30;
  /// Cumulative historical impressions kept from the CTR-ranked network feed.
  std::uint64_t top_impression_budget = 100000;
  /// Target weekly impressions; no default.
  std::uint64_t requested_scale = 0;

  void validate() const;
};

/// Scores every feature against `prior` and prices it with `policy`.
std::vector<BidRecommendation> build_recommendations(std::span<const FeatureStats> stats, const Prior& prior,
                                                     const bidder::BidPolicy& policy, Source source,
                                                     const std::string& campaign_id);

/// Adjusted CTR descending, then historical impressions descending, then key.
void sort_by_adjusted_ctr(std::vector<BidRecommendation>& recs);

struct Selection {
  std::vector<BidRecommendation> recs;
  std::uint64_t impressions = 0;
  /// Set when the whole feed was taken without reaching the budget.
  bool budget_unmet = false;
};

/// Greedy CTR-ranked prefix whose cumulative historical impressions reach
/// `budget`; the feature that crosses the threshold is included.
Selection select_network_features(std::span<const BidRecommendation> recs, std::uint64_t budget);

struct MergeResult {
  std::vector<BidRecommendation> recs;
  std::size_t network_count = 0;
  std::size_t campaign_count = 0;
  std::size_t collisions = 0;
  std::uint64_t network_impressions = 0;
  double network_target = 0.0;
  bool network_target_met = true;
};

/// All campaign features plus the CTR-ranked network prefix covering
/// network_scale_fraction * requested_scale impressions. A network feature
/// whose key also appears in the campaign set is dropped.
MergeResult merge_recommendations(std::span<const BidRecommendation> network, std::span<const BidRecommendation> campaign,
                                  const MergeConfig& config);

/// Upload-ready CSV sorted by bid descending then key. Bids are rounded
/// half-even to 3 decimals and adjusted CTR to 6. Throws EmptyRecommendationSet.
void write_recommendations(std::ostream& out, std::span<const BidRecommendation> recs);

/// write_recommendations() to `path` through a temporary file that is renamed
/// into place, so a failed export leaves nothing behind. Throws IoError.
void export_recommendations(std::span<const BidRecommendation> recs, const std::filesystem::path& path);

}  // namespace bidrec::recommend
