#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bidrec/aggregate.hpp"
#include "bidrec/bidder.hpp"
#include "bidrec/ingest.hpp"
#include "bidrec/recommend.hpp"
#include "bidrec/simulate.hpp"

namespace bidrec::config {

/// Flat `key = value` lines grouped under `[section]` headers. `#` and `;`
/// start comments. Keys are stored as "section.key".
using Entries = std::map<std::string, std::string>;

/// Throws ConfigError with the offending line number on malformed input.
Entries parse_entries(std::string_view text);

/// Everything a run needs, after config file and flag overrides are merged.
struct RunConfig {
  std::filesystem::path impressions_path;
  std::filesystem::path clicks_path;
  std::filesystem::path output_dir = ".";
  std::filesystem::path market_path;
  std::filesystem::path history_path;

  std::string campaign_id;
  /// Date stamped into the output file name; defaults to the newest event date.
  std::string run_date;

  ingest::Schema schema;
  std::vector<std::string> geo_allowlist;
  std::optional<ingest::Timestamp> window_start;
  std::optional<ingest::Timestamp> window_end;

  aggregate::AggregationConfig aggregation;

  std::optional<double> target_cpc_usd;
  std::vector<double> optimization_fractions{0.9};
  double min_bid_cpm_usd = 0.01;
  double max_bid_cpm_usd = 20.0;

  recommend::MergeConfig merge;
  std::optional<std::uint64_t> requested_scale;

  std::size_t weeks = 4;
  simulate::PriorMode prior_mode = simulate::PriorMode::Frozen;
  std::optional<Prior> simulation_prior;
  std::size_t synthetic_features = 0;
  std::uint64_t history_impressions = 0;

  std::uint64_t seed = 0;
  /// Set when --seed was passed: reports omit their timestamp line.
  bool deterministic_mode = false;
  unsigned threads = 0;

  /// Policy for one of the configured optimization fractions.
  [[nodiscard]] bidder::BidPolicy policy(double optimization_fraction) const;

  /// Stable text listing of every setting; input to config_hash().
  [[nodiscard]] std::string canonical() const;
  /// 64-bit FNV-1a of canonical(), as 16 hex digits.
  [[nodiscard]] std::string config_hash() const;

  /// Checks value ranges shared by every command. Throws ConfigError.
  void validate() const;
};

/// Applies parsed entries on top of `base`. Relative paths are resolved
/// against `base_dir`. Throws ConfigError on unknown keys or bad values.
void apply_entries(RunConfig& base, const Entries& entries, const std::filesystem::path& base_dir);

/// Reads and applies a config file. Throws ConfigError.
RunConfig load_file(const std::filesystem::path& path);

std::vector<std::string> split_list(std::string_view text);
double parse_double(std::string_view text, std::string_view what);
std::uint64_t parse_count(std::string_view text, std::string_view what);

}  // namespace bidrec::config
