#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "brief/arch.hpp"
#include "brief/lesion.hpp"
#include "brief/oracle.hpp"
#include "brief/ratio.hpp"
#include "brief/search.hpp"

namespace brief {

/// Invalid or unusable run configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelSection {
  /// sequential | descriptor
  std::string family = "sequential";
  int depth = 15;
  std::vector<int> block_widths{16, 32, 64};
  int input_channels = 3;
  int num_classes = 10;
  std::string dataset;
  std::filesystem::path descriptor;
  /// Widths assigned to the trailing macroblocks by `size`, e.g. 256,346.
  std::vector<int> reduced_trailing_widths;
};

struct OracleSection {
  /// surrogate | replay | external
  std::string kind = "surrogate";
  std::optional<double> a_max;
  std::optional<double> exponent;
  std::vector<double> weights;
  std::vector<double> frontiers;
  std::vector<std::string> trainer_command;
  std::size_t parallelism = 1;
  double timeout_seconds = 0.0;
  /// Ledger to replay from; defaults to <run_dir>/ledger.jsonl.
  std::filesystem::path ledger;
};

struct SearchSection {
  double delta = 0.01;
  std::optional<std::size_t> scope;
  BetaReturnMode beta_return = BetaReturnMode::upper_bound;
  Direction direction = Direction::backward;
  std::uint64_t seed = 0;
};

struct BudgetSection {
  /// imagenet | cifar
  std::string recipe = "imagenet";
  TrainingBudget search = TrainingBudget::search_preset();
  TrainingBudget final = TrainingBudget::final_preset();
  /// Which budget drives evaluations: search | final.
  std::string use = "search";
};

struct LesionSection {
  LesionKind kind = LesionKind::constant;
  std::vector<Ratio> values{Ratio(1)};
  /// "all", or a list of indices and ranges such as "1-5,12".
  std::string indices = "all";
};

struct RdSection {
  std::vector<Ratio> alphas{Ratio(5, 10), Ratio(6, 10), Ratio(7, 10), Ratio(8, 10), Ratio(9, 10)};
  bool with_brief = true;
};

/// Sectioned INI run configuration. Relative paths resolve against the
/// directory of the file they were read from.
struct RunConfig {
  ModelSection model;
  OracleSection oracle;
  SearchSection search;
  BudgetSection budget;
  LesionSection lesion;
  RdSection rd;
  std::filesystem::path run_dir;
  /// Subcommand that produced a resolved config (empty for user configs).
  std::string command;

  /// Unknown sections/keys seen while loading.
  std::vector<std::string> warnings;

  /// Throws ConfigError.
  static RunConfig load(const std::filesystem::path& path);
  static RunConfig parse(const std::string& text, const std::filesystem::path& base_dir = ".");

  /// Checks cross-field invariants and that referenced files exist.
  void validate() const;

  /// Resolved config with every value explicit; load(write(c)) == c.
  std::string to_ini() const;

  ModelSpec build_model() const;
  SurrogateParams surrogate_params(std::size_t num_blocks) const;
  const TrainingBudget& active_budget() const;
};

/// Parses "all" or "1-5,12" style lists. "all" expands to [first, limit).
std::vector<std::size_t> parse_index_list(const std::string& text, std::size_t first, std::size_t limit);

}  // namespace brief
