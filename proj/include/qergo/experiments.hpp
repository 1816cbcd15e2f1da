#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qergo/config.hpp"

namespace qergo {

const char* version();

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitConfig = 2, kExitStability = 3 };

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  unsigned workers = 0;
};

struct RunResult {
  int exit_code = kExitOk;
  bool pass = false;
  std::filesystem::path out;
  std::vector<std::string> files;  ///< relative to out
  nlohmann::json summary;
  std::string message;  ///< error text when exit_code is 2 or 3
};

/// Runs the configured experiment and writes its outputs plus manifest.json into the output directory.
/// Errors are reported through the exit code rather than thrown.
RunResult run_experiment(ExperimentConfig config, const RunOverrides& overrides = {});

/// Loads a TOML config (or a manifest.json written by a previous run) and runs it.
RunResult run_config_file(const std::string& path, const RunOverrides& overrides = {});

}  // namespace qergo
