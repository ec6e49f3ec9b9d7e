#include "bidrec/recommend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <system_error>

#include "bidrec/aggregate.hpp"
#include "bidrec/csv.hpp"
#include "bidrec/errors.hpp"

namespace bidrec::recommend {

void MergeConfig::validate() const {
  if (!std::isfinite(network_scale_fraction) || network_scale_fraction < 0 || network_scale_fraction > 1) {
    throw ConfigError("network_scale_fraction must be in [0, 1]");
  }
}

std::vector<BidRecommendation> build_recommendations(std::span<const FeatureStats> stats, const Prior& prior,
                                                     const bidder::BidPolicy& policy, Source source,
                                                     const std::string& campaign_id) {
  policy.validate();
  std::vector<BidRecommendation> out;
  out.reserve(stats.size());
  for (const auto& s : stats) {
    BidRecommendation rec;
    rec.key = s.key;
    rec.metrics = aggregate::adjust(prior, s);
    rec.impressions = s.impressions;
    rec.bid_cpm_usd = bidder::max_bid_cpm(policy, rec.metrics.adjusted_ctr);
    rec.source = source;
    rec.campaign_id = campaign_id;
    out.push_back(std::move(rec));
  }
  return out;
}

void sort_by_adjusted_ctr(std::vector<BidRecommendation>& recs) {
  std::sort(recs.begin(), recs.end(), [](const BidRecommendation& a, const BidRecommendation& b) {
    if (a.metrics.adjusted_ctr != b.metrics.adjusted_ctr) return a.metrics.adjusted_ctr > b.metrics.adjusted_ctr;
    if (a.impressions != b.impressions) return a.impressions > b.impressions;
    return a.key < b.key;
  });
}

Selection select_network_features(std::span<const BidRecommendation> recs, std::uint64_t budget) {
  std::vector<BidRecommendation> ranked(recs.begin(), recs.end());
  sort_by_adjusted_ctr(ranked);

  Selection sel;
  if (budget == 0) return sel;
  for (auto& rec : ranked) {
    sel.impressions += rec.impressions;
    sel.recs.push_back(std::move(rec));
    if (sel.impressions >= budget) return sel;
  }
  sel.budget_unmet = true;
  return sel;
}

MergeResult merge_recommendations(std::span<const BidRecommendation> network, std::span<const BidRecommendation> campaign,
                                  const MergeConfig& config) {
  config.validate();
  MergeResult result;
  result.network_target = config.network_scale_fraction * static_cast<double>(config.requested_scale);

  std::set<FeatureCombination> campaign_keys;
  for (const auto& rec : campaign) {
    campaign_keys.insert(rec.key);
    result.recs.push_back(rec);
  }
  result.campaign_count = campaign.size();

  std::vector<BidRecommendation> ranked(network.begin(), network.end());
  sort_by_adjusted_ctr(ranked);
  std::uint64_t covered = 0;
  for (auto& rec : ranked) {
    if (static_cast<double>(covered) >= result.network_target) break;
    covered += rec.impressions;
    if (campaign_keys.contains(rec.key)) {
      ++result.collisions;
      continue;
    }
    result.network_impressions += rec.impressions;
    result.recs.push_back(std::move(rec));
    ++result.network_count;
  }
  result.network_target_met = static_cast<double>(covered) >= result.network_target;
  return result;
}

void write_recommendations(std::ostream& out, std::span<const BidRecommendation> recs) {
  if (recs.empty()) throw EmptyRecommendationSet();
  std::vector<const BidRecommendation*> order;
  order.reserve(recs.size());
  for (const auto& rec : recs) order.push_back(&rec);
  std::sort(order.begin(), order.end(), [](const BidRecommendation* a, const BidRecommendation* b) {
    if (a->bid_cpm_usd != b->bid_cpm_usd) return a->bid_cpm_usd > b->bid_cpm_usd;
    return a->key < b->key;
  });

  std::vector<std::string> row(kFeatureFieldNames.begin(), kFeatureFieldNames.end());
  row.insert(row.end(), {"source", "adjusted_ctr", "bid_cpm_usd"});
  csv::write_row(out, row);
  for (const auto* rec : order) {
    const auto key = rec->key.to_fields();
    row.assign(key.begin(), key.end());
    row.emplace_back(to_string(rec->source));
    row.push_back(csv::format_fixed_half_even(rec->metrics.adjusted_ctr, 6));
    row.push_back(csv::format_fixed_half_even(rec->bid_cpm_usd, 3));
    csv::write_row(out, row);
  }
}

void export_recommendations(std::span<const BidRecommendation> recs, const std::filesystem::path& path) {
  if (recs.empty()) throw EmptyRecommendationSet();
  std::filesystem::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    write_recommendations(out, recs);
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move recommendations into " + path.string());
  }
}

}  // namespace bidrec::recommend
