#pragma once

#include <exception>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "bidrec/config.hpp"

namespace bidrec::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;

struct CommandResult {
  std::vector<std::filesystem::path> outputs;
  std::filesystem::path report;
  std::vector<std::string> warnings;
};

/// Full pipeline for one campaign: ingest both feeds, aggregate network and
/// campaign data, price, merge and export one file per optimization fraction.
CommandResult cmd_recommend(const config::RunConfig& cfg);

/// Debug dump of grouped statistics (aggregates.csv, plus
/// aggregates_campaign.csv when a campaign id is set).
CommandResult cmd_aggregate(const config::RunConfig& cfg);

/// Recommended-policy feedback loop against a flat baseline tuned to equal spend.
CommandResult cmd_simulate(const config::RunConfig& cfg);

/// Checks the configuration and that referenced inputs exist.
CommandResult cmd_validate_config(const config::RunConfig& cfg);

/// Maps an exception to the documented exit code.
int exit_code_for(const std::exception& e);

/// Entry point used by the `bidrec` binary.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace bidrec::cli
