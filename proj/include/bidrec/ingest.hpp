#pragma once

#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bidrec/domain.hpp"
#include "bidrec/money.hpp"

namespace bidrec::ingest {

/// Columns of the impression and click feeds that the pipeline reads.
enum class Column : std::uint8_t {
  Timestamp,
  Height,
  Width,
  DeviceType,
  OperatingSystem,
  Browser,
  FoldPosition,
  GeoCountry,
  GeoRegion,
  SellerMemberId,
  TagId,
  PublisherId,
  SiteDomain,
  InsertionOrderId,
  AdvertiserId,
  IsClick,
  MediaCost,
  DataCost,
};

inline constexpr std::size_t kColumnCount = 18;

/// Logical column names; also the default header names.
inline constexpr std::array<std::string_view, kColumnCount> kColumnNames = {
    "timestamp",        "height",         "width",         "device_type", "operating_system", "browser",
    "fold_position",    "geo_country",    "geo_region",    "seller_member_id", "tag_id",      "publisher_id",
    "site_domain",      "insertion_order_id", "advertiser_id", "is_click",  "media_cost_usd",   "data_cost_usd",
};

/// Throws ConfigError for unknown names.
Column parse_column(std::string_view logical_name);

/// Maps logical columns to the header names used by a particular feed.
class Schema {
 public:
  Schema();
  void set(Column column, std::string header_name);
  [[nodiscard]] const std::string& header(Column column) const { return names_[static_cast<std::size_t>(column)]; }

 private:
  std::array<std::string, kColumnCount> names_;
};

using Timestamp = std::chrono::sys_seconds;

/// Accepts "YYYY-MM-DD", "YYYY-MM-DD HH:MM:SS" and "YYYY-MM-DDTHH:MM:SS[Z]" (UTC).
std::optional<Timestamp> parse_timestamp(std::string_view text);
/// "YYYY-MM-DD HH:MM:SS".
std::string format_timestamp(Timestamp ts);

struct RawEventRow {
  Timestamp timestamp{};
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  DeviceType device_type = DeviceType::Other;
  std::string operating_system;
  std::string browser;
  FoldPosition fold_position = FoldPosition::Unknown;
  std::string geo_country;
  std::string geo_region;
  std::string seller_member_id;
  std::string tag_id;
  std::string publisher_id;
  std::string site_domain;
  std::string insertion_order_id;
  std::string advertiser_id;
  bool is_click = false;
  Money media_cost;
  Money data_cost;

  friend bool operator==(const RawEventRow&, const RawEventRow&) = default;
};

enum class RejectReason : std::uint8_t {
  ColumnCount,
  InvalidTimestamp,
  InvalidHeight,
  InvalidWidth,
  InvalidIsClick,
  InvalidMediaCost,
  InvalidDataCost,
  OutOfWindow,
  GeoFiltered,
  NotAClick,
};

std::string_view to_string(RejectReason reason);

struct RejectRecord {
  /// 1-based data row number (the header is not counted).
  std::size_t row_number = 0;
  RejectReason reason = RejectReason::ColumnCount;

  friend bool operator==(const RejectRecord&, const RejectRecord&) = default;
};

struct IngestOptions {
  /// Inclusive start / exclusive end of the accepted time window.
  std::optional<Timestamp> window_start;
  std::optional<Timestamp> window_end;
  /// Accepted geo_country codes; empty accepts every country.
  std::vector<std::string> geo_allowlist;
  /// Set for the click feed: rows with is_click=0 are rejected.
  bool require_click = false;
  unsigned threads = 1;
  std::size_t chunk_rows = 1 << 13;
};

struct ParseResult {
  std::vector<RawEventRow> rows;
  std::vector<RejectRecord> rejects;
};

/// Parses a whole feed into memory. Throws ConfigError when the header lacks
/// a mapped column.
ParseResult parse_feed(std::istream& in, const Schema& schema, const IngestOptions& options);

struct StreamSummary {
  std::size_t accepted = 0;
  std::vector<RejectRecord> rejects;
};

/// Streaming variant: accepted rows are handed to `sink` chunk by chunk, in
/// input order, and are not retained.
StreamSummary parse_feed_streaming(std::istream& in, const Schema& schema, const IngestOptions& options,
                                   const std::function<void(std::span<const RawEventRow>)>& sink);

/// Writes rows in the delimited format parse_feed() reads, using `schema` headers.
void write_feed(std::ostream& out, std::span<const RawEventRow> rows, const Schema& schema);

void write_rejects(std::ostream& out, std::span<const RejectRecord> rejects, std::string_view feed_name);

/// One row reduced to its feature key, click flag and realised cost.
struct FeatureEvent {
  FeatureCombination key;
  bool is_click = false;
  Money cost;
};

/// size = "<width>x<height>", geo = "<country>-<region>", cost = media + data.
FeatureEvent derive_features(const RawEventRow& row);

struct SplitResult {
  std::vector<RawEventRow> network;
  std::vector<RawEventRow> campaign;
};

/// Network rows are all rows with insertion order and advertiser blanked;
/// campaign rows are those whose insertion_order_id equals `campaign_id`.
SplitResult split_network_campaign(std::span<const RawEventRow> rows, std::string_view campaign_id);

}  // namespace bidrec::ingest
