#include "support/fixtures.hpp"

#include <array>
#include <fstream>
#include <random>
#include <sstream>

namespace bidrec::testing {

std::vector<ingest::RawEventRow> make_rows(const FeedSpec& spec) {
  static constexpr std::array<std::pair<std::uint32_t, std::uint32_t>, 4> kSizes = {
      {{300, 250}, {300, 50}, {728, 90}, {160, 600}}};
  static constexpr std::array<const char*, 3> kCountries = {"US", "CA", "GB"};
  static constexpr std::array<const char*, 3> kOs = {"Windows", "iOS", "Android"};
  static constexpr std::array<const char*, 3> kBrowsers = {"Chrome", "Safari", "Firefox"};
  static constexpr std::array<DeviceType, 3> kDevices = {DeviceType::Desktop, DeviceType::Mobile, DeviceType::Tablet};
  static constexpr std::array<FoldPosition, 3> kFolds = {FoldPosition::Above, FoldPosition::Below, FoldPosition::Unknown};

  std::mt19937_64 rng(spec.seed);
  const auto week_start = *ingest::parse_timestamp("2026-10-05 00:00:00");

  std::vector<ingest::RawEventRow> rows;
  rows.reserve(spec.rows);
  for (std::size_t i = 0; i < spec.rows; ++i) {
    // Skewed key popularity so impression counts differ per key.
    const std::size_t a = rng() % spec.distinct_keys;
    const std::size_t b = rng() % spec.distinct_keys;
    const std::size_t k = std::min(a, b);

    ingest::RawEventRow row;
    row.timestamp = week_start + std::chrono::seconds(rng() % (7 * 24 * 3600));
    row.width = kSizes[k % kSizes.size()].first;
    row.height = kSizes[k % kSizes.size()].second;
    row.device_type = kDevices[k % kDevices.size()];
    row.fold_position = kFolds[(k / 3) % kFolds.size()];
    row.operating_system = kOs[(k / 2) % kOs.size()];
    row.browser = kBrowsers[(k / 5) % kBrowsers.size()];
    row.geo_country = kCountries[(k / 7) % kCountries.size()];
    row.geo_region = std::to_string(500 + k % 13);
    row.seller_member_id = "s" + std::to_string(k % 4);
    row.tag_id = "t" + std::to_string(k);
    row.publisher_id = "p" + std::to_string(k % 6);
    row.site_domain = "site" + std::to_string(k) + ".com";
    if (!spec.campaigns.empty() && rng() % 3 != 0) {
      row.insertion_order_id = spec.campaigns[rng() % spec.campaigns.size()];
      row.advertiser_id = "adv-" + row.insertion_order_id;
    } else {
      row.insertion_order_id = "IO-other" + std::to_string(rng() % 5);
      row.advertiser_id = "adv-x";
    }
    row.is_click = rng() % 1000 < spec.clicks_per_mille + (k % 5) * 10;
    row.media_cost = Money::from_nanos(100'000 + static_cast<Int128>(rng() % 4'900'000));
    row.data_cost = Money::from_nanos(static_cast<Int128>(rng() % 500'000));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string to_csv(const std::vector<ingest::RawEventRow>& rows) {
  std::ostringstream out;
  ingest::write_feed(out, rows, ingest::Schema());
  return out.str();
}

void write_split_feeds(const std::vector<ingest::RawEventRow>& rows, const std::filesystem::path& dir) {
  std::vector<ingest::RawEventRow> impressions;
  std::vector<ingest::RawEventRow> clicks;
  for (const auto& row : rows) (row.is_click ? clicks : impressions).push_back(row);
  std::ofstream(dir / "impressions.csv", std::ios::binary) << to_csv(impressions);
  std::ofstream(dir / "clicks.csv", std::ios::binary) << to_csv(clicks);
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("bidrec_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace bidrec::testing
