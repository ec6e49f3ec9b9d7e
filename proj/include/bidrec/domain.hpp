#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bidrec/money.hpp"

namespace bidrec {

/// Enumerator order matches the alphabetical order of the exported names.
enum class DeviceType : std::uint8_t { Desktop, Mobile, Other, Tablet, Any };

/// Numeric values follow the feed encoding (1 above, 0 below).
enum class FoldPosition : std::uint8_t { Below = 0, Above = 1, Unknown = 2, Any = 3 };

enum class Source : std::uint8_t { Network, Campaign };

/// Targeting attributes, in canonical (sort and export) order.
enum class FeatureField : std::uint8_t {
  SiteDomain,
  DeviceType,
  Size,
  FoldPosition,
  Geo,
  OperatingSystem,
  Browser,
  SellerMemberId,
  TagId,
  PublisherId,
};

inline constexpr std::size_t kFeatureFieldCount = 10;

/// Column names used for feature key fields in every file this project writes.
inline constexpr std::array<std::string_view, kFeatureFieldCount> kFeatureFieldNames = {
    "site_domain", "device_type",      "size",   "fold_position", "geo",
    "operating_system", "browser", "seller_member_id", "tag_id", "publisher_id",
};

std::vector<FeatureField> all_feature_fields();
std::string_view to_string(FeatureField field);
/// Throws ConfigError for unknown names.
FeatureField parse_feature_field(std::string_view name);

std::string_view to_string(DeviceType device);
/// Case-insensitive; anything unrecognised becomes Other, "*" becomes Any.
DeviceType parse_device_type(std::string_view text);

std::string_view to_string(FoldPosition fold);
/// "1"/"above" -> Above, "0"/"below" -> Below, "*" -> Any, else Unknown.
FoldPosition parse_fold_position(std::string_view text);

std::string_view to_string(Source source);

/// Wildcard used for key fields that were projected out of a grouping.
inline constexpr std::string_view kAnyValue = "*";

/// The targeting context an impression was served in. Carries no user-level
/// identifier. Strings are kept verbatim; comparison is exact.
struct FeatureCombination {
  std::string site_domain;
  DeviceType device_type = DeviceType::Other;
  std::string size = "1x1";
  FoldPosition fold_position = FoldPosition::Unknown;
  std::string geo;
  std::string operating_system;
  std::string browser;
  std::string seller_member_id;
  std::string tag_id;
  std::string publisher_id;

  friend auto operator<=>(const FeatureCombination&, const FeatureCombination&) = default;
  friend bool operator==(const FeatureCombination&, const FeatureCombination&) = default;

  /// Throws std::invalid_argument unless size is "<w>x<h>" with w,h > 0 (or "*").
  void validate() const;

  /// Copy with every field not in `keep` replaced by its wildcard.
  [[nodiscard]] FeatureCombination project(std::span<const FeatureField> keep) const;

  /// Field texts in canonical order.
  [[nodiscard]] std::array<std::string, kFeatureFieldCount> to_fields() const;
  /// Inverse of to_fields(); validates the result.
  static FeatureCombination from_fields(std::span<const std::string> fields);

  /// Unambiguous single-string encoding (unit-separator joined).
  [[nodiscard]] std::string canonical() const;
};

bool is_valid_size(std::string_view size);

struct FeatureCombinationHash {
  std::size_t operator()(const FeatureCombination& key) const noexcept;
};

/// Observed totals for one feature combination.
struct FeatureStats {
  FeatureCombination key;
  std::uint64_t impressions = 0;
  std::uint64_t clicks = 0;
  Money cost;

  /// Throws std::invalid_argument when clicks > impressions, cost < 0, or
  /// cost != 0 with zero impressions.
  void validate() const;

  [[nodiscard]] double ctr() const;
  [[nodiscard]] double cpm_usd() const;

  /// Adds counts and cost; the key is left unchanged.
  FeatureStats& operator+=(const FeatureStats& other);
};

/// Pseudo-counts added to every feature before computing its rates.
struct Prior {
  double prior_clicks = 0.0;
  double prior_impressions = 0.0;
  double prior_cpm_usd = 0.0;

  /// Validating constructor.
  static Prior make(double clicks, double impressions, double cpm_usd);

  [[nodiscard]] double prior_non_clicks() const { return prior_impressions - prior_clicks; }
  /// Prior click rate; 0 when there is no prior mass.
  [[nodiscard]] double ctr() const;
};

struct AdjustedMetrics {
  double adjusted_ctr = 0.0;
  double adjusted_cost_usd = 0.0;
  double adjusted_impressions = 0.0;
  double adjusted_cpm_usd = 0.0;

  static AdjustedMetrics make(double ctr, double cost_usd, double impressions, double cpm_usd);
};

struct BidRecommendation {
  FeatureCombination key;
  AdjustedMetrics metrics;
  /// Historical impressions behind the estimate; used for scale budgeting.
  std::uint64_t impressions = 0;
  double bid_cpm_usd = 0.0;
  Source source = Source::Network;
  std::string campaign_id;
};

/// Throws std::invalid_argument if `value` is NaN or infinite.
double require_finite(double value, std::string_view what);

}  // namespace bidrec

template <>
struct std::hash<bidrec::FeatureCombination> : bidrec::FeatureCombinationHash {};
