#include "bidrec/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <variant>

#include "bidrec/csv.hpp"
#include "bidrec/errors.hpp"
#include "bidrec/parallel.hpp"

namespace bidrec::ingest {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

bool parse_pixels(std::string_view s, std::uint32_t& out) { return parse_int(s, out) && out > 0; }

bool parse_cost(std::string_view s, Money& out) { return Money::parse(s, out) && !out.negative(); }

using RecordResult = std::variant<RawEventRow, RejectReason>;

class RowParser {
 public:
  RowParser(const std::vector<std::string>& header, const Schema& schema, const IngestOptions& options)
      : options_(options), width_(header.size()) {
    for (std::size_t c = 0; c < kColumnCount; ++c) {
      const std::string& name = schema.header(static_cast<Column>(c));
      const auto it = std::find(header.begin(), header.end(), name);
      if (it == header.end()) {
        throw ConfigError("feed header is missing column '" + name + "' (" + std::string(kColumnNames[c]) + ")");
      }
      index_[c] = static_cast<std::size_t>(it - header.begin());
    }
  }

  [[nodiscard]] RecordResult parse(const std::vector<std::string>& fields) const {
    if (fields.size() != width_) return RejectReason::ColumnCount;
    auto field = [&](Column c) -> const std::string& { return fields[index_[static_cast<std::size_t>(c)]]; };

    RawEventRow row;
    const auto ts = parse_timestamp(field(Column::Timestamp));
    if (!ts) return RejectReason::InvalidTimestamp;
    row.timestamp = *ts;
    if (!parse_pixels(field(Column::Height), row.height)) return RejectReason::InvalidHeight;
    if (!parse_pixels(field(Column::Width), row.width)) return RejectReason::InvalidWidth;

    const std::string_view click = trim(field(Column::IsClick));
    if (click == "1") {
      row.is_click = true;
    } else if (click == "0") {
      row.is_click = false;
    } else {
      return RejectReason::InvalidIsClick;
    }
    if (!parse_cost(field(Column::MediaCost), row.media_cost)) return RejectReason::InvalidMediaCost;
    if (!parse_cost(field(Column::DataCost), row.data_cost)) return RejectReason::InvalidDataCost;

    if (options_.window_start && row.timestamp < *options_.window_start) return RejectReason::OutOfWindow;
    if (options_.window_end && row.timestamp >= *options_.window_end) return RejectReason::OutOfWindow;

    row.geo_country = field(Column::GeoCountry);
    if (!options_.geo_allowlist.empty() &&
        std::find(options_.geo_allowlist.begin(), options_.geo_allowlist.end(), row.geo_country) ==
            options_.geo_allowlist.end()) {
      return RejectReason::GeoFiltered;
    }
    if (options_.require_click && !row.is_click) return RejectReason::NotAClick;

    row.device_type = parse_device_type(trim(field(Column::DeviceType)));
    row.fold_position = parse_fold_position(trim(field(Column::FoldPosition)));
    row.operating_system = field(Column::OperatingSystem);
    row.browser = field(Column::Browser);
    row.geo_region = field(Column::GeoRegion);
    row.seller_member_id = field(Column::SellerMemberId);
    row.tag_id = field(Column::TagId);
    row.publisher_id = field(Column::PublisherId);
    row.site_domain = field(Column::SiteDomain);
    row.insertion_order_id = field(Column::InsertionOrderId);
    row.advertiser_id = field(Column::AdvertiserId);
    return row;
  }

 private:
  const IngestOptions& options_;
  std::size_t width_;
  std::array<std::size_t, kColumnCount> index_{};
};

}  // namespace

Column parse_column(std::string_view logical_name) {
  for (std::size_t i = 0; i < kColumnCount; ++i) {
    if (kColumnNames[i] == logical_name) return static_cast<Column>(i);
  }
  throw ConfigError("unknown feed column '" + std::string(logical_name) + "'");
}

Schema::Schema() {
  for (std::size_t i = 0; i < kColumnCount; ++i) names_[i] = std::string(kColumnNames[i]);
}

void Schema::set(Column column, std::string header_name) {
  if (header_name.empty()) throw ConfigError("empty header name for column " + std::string(kColumnNames[static_cast<std::size_t>(column)]));
  names_[static_cast<std::size_t>(column)] = std::move(header_name);
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  text = trim(text);
  if (!text.empty() && (text.back() == 'Z' || text.back() == 'z')) text.remove_suffix(1);
  if (text.size() != 10 && text.size() != 19) return std::nullopt;
  if (text[4] != '-' || text[7] != '-') return std::nullopt;

  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, s = 0;
  if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), mo) || !parse_int(text.substr(8, 2), d)) {
    return std::nullopt;
  }
  if (text.size() == 19) {
    if ((text[10] != ' ' && text[10] != 'T') || text[13] != ':' || text[16] != ':') return std::nullopt;
    if (!parse_int(text.substr(11, 2), h) || !parse_int(text.substr(14, 2), mi) || !parse_int(text.substr(17, 2), s)) {
      return std::nullopt;
    }
    if (h > 23 || mi > 59 || s > 59) return std::nullopt;
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{mo}, std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  return std::chrono::sys_days{ymd} + std::chrono::hours{h} + std::chrono::minutes{mi} + std::chrono::seconds{s};
}

std::string format_timestamp(Timestamp ts) {
  const auto days = std::chrono::floor<std::chrono::days>(ts);
  const std::chrono::year_month_day ymd{days};
  const std::chrono::hh_mm_ss hms{ts - days};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02d:%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::ColumnCount: return "column_count";
    case RejectReason::InvalidTimestamp: return "invalid_timestamp";
    case RejectReason::InvalidHeight: return "invalid_height";
    case RejectReason::InvalidWidth: return "invalid_width";
    case RejectReason::InvalidIsClick: return "invalid_is_click";
    case RejectReason::InvalidMediaCost: return "invalid_media_cost";
    case RejectReason::InvalidDataCost: return "invalid_data_cost";
    case RejectReason::OutOfWindow: return "out_of_window";
    case RejectReason::GeoFiltered: return "geo_filtered";
    case RejectReason::NotAClick: return "not_a_click";
  }
  return "unknown";
}

StreamSummary parse_feed_streaming(std::istream& in, const Schema& schema, const IngestOptions& options,
                                   const std::function<void(std::span<const RawEventRow>)>& sink) {
  csv::Reader reader(in);
  std::vector<std::string> header;
  if (!reader.next(header)) throw ConfigError("feed is empty: header row required");
  if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].erase(0, 3);
  const RowParser parser(header, schema, options);

  const unsigned threads = resolve_threads(options.threads);
  const std::size_t chunk_rows = std::max<std::size_t>(1, options.chunk_rows);

  StreamSummary summary;
  std::vector<std::vector<std::string>> records(chunk_rows);
  std::vector<RecordResult> results(chunk_rows);
  std::vector<RawEventRow> accepted;
  std::size_t row_number = 0;

  for (;;) {
    std::size_t n = 0;
    while (n < chunk_rows && reader.next(records[n])) {
      // Blank lines are not data rows.
      if (records[n].size() == 1 && records[n][0].empty()) continue;
      ++n;
    }
    if (n == 0) break;

    for_each_part(n, threads, threads, [&](std::size_t, std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) results[i] = parser.parse(records[i]);
    });

    accepted.clear();
    for (std::size_t i = 0; i < n; ++i) {
      ++row_number;
      if (auto* row = std::get_if<RawEventRow>(&results[i])) {
        accepted.push_back(std::move(*row));
      } else {
        summary.rejects.push_back({row_number, std::get<RejectReason>(results[i])});
      }
    }
    summary.accepted += accepted.size();
    if (!accepted.empty()) sink(accepted);
    if (n < chunk_rows) break;
  }
  return summary;
}

ParseResult parse_feed(std::istream& in, const Schema& schema, const IngestOptions& options) {
  ParseResult result;
  auto summary = parse_feed_streaming(in, schema, options, [&](std::span<const RawEventRow> rows) {
    result.rows.insert(result.rows.end(), rows.begin(), rows.end());
  });
  result.rejects = std::move(summary.rejects);
  return result;
}

void write_feed(std::ostream& out, std::span<const RawEventRow> rows, const Schema& schema) {
  std::vector<std::string> fields(kColumnCount);
  for (std::size_t c = 0; c < kColumnCount; ++c) fields[c] = schema.header(static_cast<Column>(c));
  csv::write_row(out, fields);
  for (const auto& row : rows) {
    fields[static_cast<std::size_t>(Column::Timestamp)] = format_timestamp(row.timestamp);
    fields[static_cast<std::size_t>(Column::Height)] = std::to_string(row.height);
    fields[static_cast<std::size_t>(Column::Width)] = std::to_string(row.width);
    fields[static_cast<std::size_t>(Column::DeviceType)] = std::string(to_string(row.device_type));
    fields[static_cast<std::size_t>(Column::OperatingSystem)] = row.operating_system;
    fields[static_cast<std::size_t>(Column::Browser)] = row.browser;
    fields[static_cast<std::size_t>(Column::FoldPosition)] = std::string(to_string(row.fold_position));
    fields[static_cast<std::size_t>(Column::GeoCountry)] = row.geo_country;
    fields[static_cast<std::size_t>(Column::GeoRegion)] = row.geo_region;
    fields[static_cast<std::size_t>(Column::SellerMemberId)] = row.seller_member_id;
    fields[static_cast<std::size_t>(Column::TagId)] = row.tag_id;
    fields[static_cast<std::size_t>(Column::PublisherId)] = row.publisher_id;
    fields[static_cast<std::size_t>(Column::SiteDomain)] = row.site_domain;
    fields[static_cast<std::size_t>(Column::InsertionOrderId)] = row.insertion_order_id;
    fields[static_cast<std::size_t>(Column::AdvertiserId)] = row.advertiser_id;
    fields[static_cast<std::size_t>(Column::IsClick)] = row.is_click ? "1" : "0";
    fields[static_cast<std::size_t>(Column::MediaCost)] = row.media_cost.to_string();
    fields[static_cast<std::size_t>(Column::DataCost)] = row.data_cost.to_string();
    csv::write_row(out, fields);
  }
}

void write_rejects(std::ostream& out, std::span<const RejectRecord> rejects, std::string_view feed_name) {
  for (const auto& r : rejects) {
    out << r.row_number << ',' << to_string(r.reason) << ',' << csv::escape(feed_name) << '\n';
  }
}

FeatureEvent derive_features(const RawEventRow& row) {
  FeatureEvent event;
  event.key.site_domain = row.site_domain;
  event.key.device_type = row.device_type;
  event.key.size = std::to_string(row.width) + "x" + std::to_string(row.height);
  event.key.fold_position = row.fold_position;
  event.key.geo = row.geo_country + "-" + row.geo_region;
  event.key.operating_system = row.operating_system;
  event.key.browser = row.browser;
  event.key.seller_member_id = row.seller_member_id;
  event.key.tag_id = row.tag_id;
  event.key.publisher_id = row.publisher_id;
  event.is_click = row.is_click;
  event.cost = row.media_cost + row.data_cost;
  return event;
}

SplitResult split_network_campaign(std::span<const RawEventRow> rows, std::string_view campaign_id) {
  if (campaign_id.empty()) throw ConfigError("campaign id must be non-empty");
  SplitResult out;
  out.network.reserve(rows.size());
  for (const auto& row : rows) {
    if (row.insertion_order_id == campaign_id) out.campaign.push_back(row);
    RawEventRow& net = out.network.emplace_back(row);
    net.insertion_order_id.clear();
    net.advertiser_id.clear();
  }
  return out;
}

}  // namespace bidrec::ingest
