#include "bidrec/domain.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include "bidrec/errors.hpp"

namespace bidrec {
namespace {

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

void hash_combine(std::size_t& seed, std::size_t value) {
  seed ^= value + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2);
}

}  // namespace

std::vector<FeatureField> all_feature_fields() {
  std::vector<FeatureField> out;
  for (std::size_t i = 0; i < kFeatureFieldCount; ++i) out.push_back(static_cast<FeatureField>(i));
  return out;
}

std::string_view to_string(FeatureField field) { return kFeatureFieldNames.at(static_cast<std::size_t>(field)); }

FeatureField parse_feature_field(std::string_view name) {
  for (std::size_t i = 0; i < kFeatureFieldCount; ++i) {
    if (kFeatureFieldNames[i] == name) return static_cast<FeatureField>(i);
  }
  throw ConfigError("unknown feature field '" + std::string(name) + "'");
}

std::string_view to_string(DeviceType device) {
  switch (device) {
    case DeviceType::Desktop: return "Desktop";
    case DeviceType::Mobile: return "Mobile";
    case DeviceType::Tablet: return "Tablet";
    case DeviceType::Other: return "Other";
    case DeviceType::Any: return kAnyValue;
  }
  return "Other";
}

DeviceType parse_device_type(std::string_view text) {
  if (iequals(text, "desktop")) return DeviceType::Desktop;
  if (iequals(text, "mobile")) return DeviceType::Mobile;
  if (iequals(text, "tablet")) return DeviceType::Tablet;
  if (text == kAnyValue) return DeviceType::Any;
  return DeviceType::Other;
}

std::string_view to_string(FoldPosition fold) {
  switch (fold) {
    case FoldPosition::Below: return "0";
    case FoldPosition::Above: return "1";
    case FoldPosition::Unknown: return "unknown";
    case FoldPosition::Any: return kAnyValue;
  }
  return "unknown";
}

FoldPosition parse_fold_position(std::string_view text) {
  if (text == "1" || iequals(text, "above")) return FoldPosition::Above;
  if (text == "0" || iequals(text, "below")) return FoldPosition::Below;
  if (text == kAnyValue) return FoldPosition::Any;
  return FoldPosition::Unknown;
}

std::string_view to_string(Source source) { return source == Source::Network ? "network" : "campaign"; }

bool is_valid_size(std::string_view size) {
  if (size == kAnyValue) return true;
  const auto x = size.find('x');
  if (x == std::string_view::npos || x == 0 || x + 1 == size.size()) return false;
  auto positive_digits = [](std::string_view part) {
    if (!std::all_of(part.begin(), part.end(), [](char c) { return c >= '0' && c <= '9'; })) return false;
    return part.find_first_not_of('0') != std::string_view::npos;
  };
  return positive_digits(size.substr(0, x)) && positive_digits(size.substr(x + 1));
}

void FeatureCombination::validate() const {
  if (!is_valid_size(size)) throw std::invalid_argument("invalid size '" + size + "'");
}

FeatureCombination FeatureCombination::project(std::span<const FeatureField> keep) const {
  std::array<bool, kFeatureFieldCount> kept{};
  for (FeatureField f : keep) kept[static_cast<std::size_t>(f)] = true;
  auto is_kept = [&](FeatureField f) { return kept[static_cast<std::size_t>(f)]; };
  const std::string any(kAnyValue);

  FeatureCombination out;
  out.site_domain = is_kept(FeatureField::SiteDomain) ? site_domain : any;
  out.device_type = is_kept(FeatureField::DeviceType) ? device_type : DeviceType::Any;
  out.size = is_kept(FeatureField::Size) ? size : any;
  out.fold_position = is_kept(FeatureField::FoldPosition) ? fold_position : FoldPosition::Any;
  out.geo = is_kept(FeatureField::Geo) ? geo : any;
  out.operating_system = is_kept(FeatureField::OperatingSystem) ? operating_system : any;
  out.browser = is_kept(FeatureField::Browser) ? browser : any;
  out.seller_member_id = is_kept(FeatureField::SellerMemberId) ? seller_member_id : any;
  out.tag_id = is_kept(FeatureField::TagId) ? tag_id : any;
  out.publisher_id = is_kept(FeatureField::PublisherId) ? publisher_id : any;
  return out;
}

std::array<std::string, kFeatureFieldCount> FeatureCombination::to_fields() const {
  return {site_domain,
          std::string(to_string(device_type)),
          size,
          std::string(to_string(fold_position)),
          geo,
          operating_system,
          browser,
          seller_member_id,
          tag_id,
          publisher_id};
}

FeatureCombination FeatureCombination::from_fields(std::span<const std::string> fields) {
  if (fields.size() < kFeatureFieldCount) throw std::invalid_argument("feature key needs 10 fields");
  FeatureCombination key;
  key.site_domain = fields[0];
  key.device_type = parse_device_type(fields[1]);
  key.size = fields[2];
  key.fold_position = parse_fold_position(fields[3]);
  key.geo = fields[4];
  key.operating_system = fields[5];
  key.browser = fields[6];
  key.seller_member_id = fields[7];
  key.tag_id = fields[8];
  key.publisher_id = fields[9];
  key.validate();
  return key;
}

std::string FeatureCombination::canonical() const {
  std::string out;
  for (const auto& field : to_fields()) {
    out += field;
    out.push_back('\x1f');
  }
  return out;
}

std::size_t FeatureCombinationHash::operator()(const FeatureCombination& key) const noexcept {
  std::hash<std::string> h;
  std::size_t seed = 0;
  hash_combine(seed, h(key.site_domain));
  hash_combine(seed, static_cast<std::size_t>(key.device_type));
  hash_combine(seed, h(key.size));
  hash_combine(seed, static_cast<std::size_t>(key.fold_position));
  hash_combine(seed, h(key.geo));
  hash_combine(seed, h(key.operating_system));
  hash_combine(seed, h(key.browser));
  hash_combine(seed, h(key.seller_member_id));
  hash_combine(seed, h(key.tag_id));
  hash_combine(seed, h(key.publisher_id));
  return seed;
}

void FeatureStats::validate() const {
  if (clicks > impressions) throw std::invalid_argument("clicks exceed impressions");
  if (cost.negative()) throw std::invalid_argument("cost must be non-negative");
  if (impressions == 0 && !cost.zero()) throw std::invalid_argument("cost without impressions");
}

double FeatureStats::ctr() const {
  return impressions == 0 ? 0.0 : static_cast<double>(clicks) / static_cast<double>(impressions);
}

double FeatureStats::cpm_usd() const {
  return impressions == 0 ? 0.0 : cost.usd() / static_cast<double>(impressions) * 1000.0;
}

FeatureStats& FeatureStats::operator+=(const FeatureStats& other) {
  impressions += other.impressions;
  clicks += other.clicks;
  cost += other.cost;
  return *this;
}

double require_finite(double value, std::string_view what) {
  if (!std::isfinite(value)) throw std::invalid_argument(std::string(what) + " must be finite");
  return value;
}

Prior Prior::make(double clicks, double impressions, double cpm_usd) {
  require_finite(clicks, "prior_clicks");
  require_finite(impressions, "prior_impressions");
  require_finite(cpm_usd, "prior_cpm_usd");
  if (clicks < 0 || impressions < 0 || cpm_usd < 0) throw std::invalid_argument("prior fields must be non-negative");
  if (clicks > impressions) throw std::invalid_argument("prior_clicks exceeds prior_impressions");
  return Prior{clicks, impressions, cpm_usd};
}

double Prior::ctr() const { return prior_impressions > 0 ? prior_clicks / prior_impressions : 0.0; }

AdjustedMetrics AdjustedMetrics::make(double ctr, double cost_usd, double impressions, double cpm_usd) {
  require_finite(ctr, "adjusted_ctr");
  require_finite(cost_usd, "adjusted_cost_usd");
  require_finite(impressions, "adjusted_impressions");
  require_finite(cpm_usd, "adjusted_cpm_usd");
  if (ctr < 0 || ctr > 1) throw std::invalid_argument("adjusted_ctr outside [0,1]");
  if (cost_usd < 0 || cpm_usd < 0) throw std::invalid_argument("adjusted cost must be non-negative");
  if (!(impressions > 0)) throw std::invalid_argument("adjusted_impressions must be positive");
  return AdjustedMetrics{ctr, cost_usd, impressions, cpm_usd};
}

}  // namespace bidrec
