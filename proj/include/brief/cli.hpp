#pragma once

#include <cstddef>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace brief {

/// Names the default run directory root (default "runs").
inline constexpr const char* kRunRootEnv = "BRIEF_RUN_ROOT";

/// Exit codes: 0 ok, 1 runtime failure, 2 usage or configuration error.
struct RunOutcome {
  int exit_code = 0;
  /// Evaluations that reached a surrogate or trainer (ledger hits excluded).
  std::size_t fresh_evaluations = 0;
  std::filesystem::path run_dir;
};

/// Runs one `brief` invocation. `args` excludes the program name.
///
///   brief reduce|lesion|rd|size|replay --config PATH [--delta D] [--scope S]
///         [--budget search|final] [--out DIR] [--oracle surrogate|replay|external]
///   lesion: [--kind K] [--values V,...] [--indices all|1-5,9]
///   rd:     [--alphas A,...] [--no-brief]
///
/// `replay` takes the config.ini of an earlier run directory and re-renders
/// that run's outputs from its ledger into --out (default <run>/replay).
RunOutcome run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace brief
