#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bidrec/ingest.hpp"

namespace bidrec::testing {

/// Synthetic impression/click feed.
struct FeedSpec {
  std::size_t rows = 1000;
  std::size_t distinct_keys = 50;
  std::vector<std::string> campaigns{"IO-1", "IO-2"};
  /// Per-mille click probability.
  unsigned clicks_per_mille = 20;
  std::uint64_t seed = 1;
};

/// Deterministic rows: keys drawn from a fixed pool, costs in whole nanos,
/// timestamps inside the week starting 2026-10-05.
std::vector<ingest::RawEventRow> make_rows(const FeedSpec& spec);

std::string to_csv(const std::vector<ingest::RawEventRow>& rows);

/// Writes impressions (is_click=0) and clicks (is_click=1) feeds into `dir`.
void write_split_feeds(const std::vector<ingest::RawEventRow>& rows, const std::filesystem::path& dir);

/// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& name);

std::string read_file(const std::filesystem::path& path);

}  // namespace bidrec::testing
