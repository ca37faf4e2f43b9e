#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "brief/accounting.hpp"
#include "brief/arch.hpp"
#include "brief/oracle.hpp"
#include "brief/ratio.hpp"

namespace brief {

/// What a finished block search reports as beta_i. upper_bound returns U,
/// the smallest multiplier that was actually evaluated as feasible (or 1);
/// last_midpoint returns the final probe even if it was infeasible.
enum class BetaReturnMode { upper_bound, last_midpoint };

enum class Direction { backward, forward };

std::string_view to_string(BetaReturnMode mode);
BetaReturnMode parse_beta_return_mode(std::string_view text);
std::string_view to_string(Direction direction);
Direction parse_direction(std::string_view text);

struct SearchOptions {
  /// Distortion budget; a probe is feasible iff distortion < delta.
  double delta = 0.01;
  /// Number of trailing macroblocks to search; 0 searches all of them.
  std::size_t scope = 0;
  BetaReturnMode beta_return = BetaReturnMode::upper_bound;

  void validate() const;
};

struct ProbeRecord {
  std::size_t block = 0;
  Ratio beta;
  /// ceil(beta * n_b) for the block's nominal width n_b.
  int width = 0;
  bool feasible = false;
  double distortion = 0.0;
  EvaluationRecord evaluation;
};

struct BlockSearch {
  std::size_t block = 0;
  Ratio beta{1};
  Ratio lower{1, 2};
  Ratio upper{1};
  std::vector<ProbeRecord> trace;
  /// Every probe came back without an accuracy (failed or timed out).
  bool exhausted = false;
};

/// Bisection for one macroblock's multiplier over [1/2, 1].
///
/// While (U - L) * n_b > 1 the midpoint is evaluated on `working` with the
/// block scaled; feasible probes lower U, infeasible or failed probes raise
/// L. Issues exactly ceil(log2(n_b / 2)) oracle calls for n_b >= 2.
BlockSearch search_macroblock_multiplier(const ModelSpec& model, const MacroblockPartition& partition,
                                         std::size_t block, const ChannelConfig& working, double baseline_top1,
                                         const SearchOptions& options, Oracle& oracle, const TrainingBudget& budget);

/// Raised when the baseline accuracy cannot be obtained.
class BaselineUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReductionResult {
  std::string model_name;
  Direction direction = Direction::backward;
  SearchOptions options;
  /// One multiplier per macroblock; unsearched blocks keep 1.
  std::vector<Ratio> betas;
  /// Searched blocks in visiting order.
  std::vector<std::size_t> scope;
  ChannelConfig nominal_config;
  ChannelConfig reduced_config;
  SizeReport base_report;
  SizeReport reduced_report;
  EvaluationRecord baseline;
  /// Evaluation of reduced_config taken from the trace (or the baseline).
  std::optional<EvaluationRecord> reduced_evaluation;
  std::vector<ProbeRecord> trace;
  std::vector<std::size_t> exhausted_blocks;
  std::vector<std::string> diagnostics;

  double saving_percent() const;
  /// Widths of the reduced config per macroblock (max entry of each block).
  std::vector<int> reduced_block_widths() const;
};

/// Greedy search from the last macroblock toward the first; each fixed
/// reduction stays in place while earlier blocks are searched.
ReductionResult brief_backward_reduction(const ModelSpec& model, const MacroblockPartition& partition,
                                         const SearchOptions& options, Oracle& oracle, const TrainingBudget& budget);

/// Same block set as the backward search, visited first-to-last.
ReductionResult forward_reduction(const ModelSpec& model, const MacroblockPartition& partition,
                                  const SearchOptions& options, Oracle& oracle, const TrainingBudget& budget);

nlohmann::json to_json(const ReductionResult& result);

}  // namespace brief
