#include "brief/search.hpp"

#include <algorithm>
#include <cmath>

namespace brief {

using nlohmann::json;

std::string_view to_string(BetaReturnMode mode) {
  return mode == BetaReturnMode::upper_bound ? "U" : "last_midpoint";
}

BetaReturnMode parse_beta_return_mode(std::string_view text) {
  if (text == "U" || text == "upper_bound") return BetaReturnMode::upper_bound;
  if (text == "last_midpoint") return BetaReturnMode::last_midpoint;
  throw std::invalid_argument("beta_return_mode must be U or last_midpoint, got '" + std::string(text) + "'");
}

std::string_view to_string(Direction direction) { return direction == Direction::backward ? "backward" : "forward"; }

Direction parse_direction(std::string_view text) {
  if (text == "backward") return Direction::backward;
  if (text == "forward") return Direction::forward;
  throw std::invalid_argument("direction must be backward or forward, got '" + std::string(text) + "'");
}

void SearchOptions::validate() const {
  if (!std::isfinite(delta) || delta < 0.0 || delta > 1.0)
    throw std::invalid_argument("delta must lie in [0, 1], got " + std::to_string(delta));
}

BlockSearch search_macroblock_multiplier(const ModelSpec& model, const MacroblockPartition& partition,
                                         std::size_t block, const ChannelConfig& working, double baseline_top1,
                                         const SearchOptions& options, Oracle& oracle, const TrainingBudget& budget) {
  options.validate();
  if (block >= partition.size()) throw std::invalid_argument("macroblock index " + std::to_string(block) + " out of range");

  const std::int64_t width = partition.widths[block];
  BlockSearch result;
  result.block = block;

  Ratio lower(1, 2);
  Ratio upper(1);
  std::optional<Ratio> last_probe;
  std::size_t failures = 0;

  while ((upper - lower).times_exceeds_one(width)) {
    const Ratio probe = midpoint(lower, upper);
    ChannelConfig candidate = apply_macroblock_scale(working, partition, block, probe);

    ProbeRecord rec;
    rec.block = block;
    rec.beta = probe;
    rec.width = static_cast<int>(probe.ceil_mul(width));
    rec.evaluation = oracle.evaluate(model, candidate, budget);
    if (rec.evaluation.ok()) {
      rec.distortion = distortion(baseline_top1, rec.evaluation.top1);
      rec.feasible = rec.distortion < options.delta;
    } else {
      ++failures;
    }

    if (rec.feasible) {
      upper = probe;
    } else {
      lower = probe;
    }
    last_probe = probe;
    result.trace.push_back(std::move(rec));
  }

  result.lower = lower;
  result.upper = upper;
  result.exhausted = !result.trace.empty() && failures == result.trace.size();
  if (result.exhausted) {
    result.beta = Ratio(1);
  } else if (options.beta_return == BetaReturnMode::last_midpoint && last_probe) {
    result.beta = *last_probe;
  } else {
    result.beta = upper;
  }
  return result;
}

namespace {

ReductionResult run_reduction(const ModelSpec& model, const MacroblockPartition& partition,
                              const SearchOptions& options, Oracle& oracle, const TrainingBudget& budget,
                              Direction direction) {
  options.validate();
  budget.validate();
  model.validate();
  const std::size_t blocks = partition.size();
  if (blocks != model.nominal.num_blocks()) throw std::invalid_argument("partition does not match the model");
  const std::size_t scope = options.scope == 0 ? blocks : options.scope;
  if (scope < 1 || scope > blocks)
    throw std::invalid_argument("scope must lie in [1, " + std::to_string(blocks) + "], got " + std::to_string(scope));

  ReductionResult result;
  result.model_name = model.name;
  result.direction = direction;
  result.options = options;
  result.betas.assign(blocks, Ratio(1));
  result.nominal_config = model.nominal;

  for (std::size_t k = 0; k < scope; ++k) result.scope.push_back(blocks - 1 - k);
  if (direction == Direction::forward) std::reverse(result.scope.begin(), result.scope.end());

  result.baseline = oracle.evaluate(model, model.nominal, budget);
  if (!result.baseline.ok())
    throw BaselineUnavailable("baseline evaluation " + std::string(to_string(result.baseline.status)) +
                              (result.baseline.message.empty() ? "" : ": " + result.baseline.message));

  ChannelConfig working = model.nominal;
  for (std::size_t block : result.scope) {
    BlockSearch s = search_macroblock_multiplier(model, partition, block, working, result.baseline.top1, options,
                                                 oracle, budget);
    if (s.exhausted) {
      result.exhausted_blocks.push_back(block);
      result.diagnostics.push_back("macroblock " + std::to_string(block) + ": all " + std::to_string(s.trace.size()) +
                                   " evaluations failed; multiplier left at 1");
    }
    result.betas[block] = s.beta;
    if (s.beta < Ratio(1)) working = apply_macroblock_scale(working, partition, block, s.beta);
    for (auto& p : s.trace) result.trace.push_back(std::move(p));
  }

  result.reduced_config = working;
  result.base_report = count_parameters(model);
  result.reduced_report = count_parameters(model, working);

  if (working == model.nominal) {
    result.reduced_evaluation = result.baseline;
  } else {
    for (auto it = result.trace.rbegin(); it != result.trace.rend(); ++it) {
      if (it->evaluation.channels == working.channels) {
        result.reduced_evaluation = it->evaluation;
        break;
      }
    }
  }
  return result;
}

}  // namespace

ReductionResult brief_backward_reduction(const ModelSpec& model, const MacroblockPartition& partition,
                                         const SearchOptions& options, Oracle& oracle, const TrainingBudget& budget) {
  return run_reduction(model, partition, options, oracle, budget, Direction::backward);
}

ReductionResult forward_reduction(const ModelSpec& model, const MacroblockPartition& partition,
                                  const SearchOptions& options, Oracle& oracle, const TrainingBudget& budget) {
  return run_reduction(model, partition, options, oracle, budget, Direction::forward);
}

double ReductionResult::saving_percent() const { return brief::saving_percent(base_report, reduced_report); }

std::vector<int> ReductionResult::reduced_block_widths() const {
  std::vector<int> widths;
  for (std::size_t b = 0; b < reduced_config.num_blocks(); ++b) {
    auto [begin, end] = reduced_config.block_range(b);
    widths.push_back(*std::max_element(reduced_config.channels.begin() + static_cast<std::ptrdiff_t>(begin),
                                       reduced_config.channels.begin() + static_cast<std::ptrdiff_t>(end)));
  }
  return widths;
}

namespace {

json size_json(const SizeReport& r) {
  json blocks = json::array();
  for (const auto& b : r.per_block_breakdown)
    blocks.push_back({{"block_id", b.block_id}, {"params", b.params}, {"buffers", b.buffers}, {"bytes", b.bytes}});
  return json{{"parameter_count", r.parameter_count},
              {"buffer_count", r.buffer_count},
              {"size_bytes", r.size_bytes},
              {"head_params", r.head_params},
              {"per_block_breakdown", std::move(blocks)}};
}

}  // namespace

json to_json(const ReductionResult& r) {
  json betas = json::array();
  for (const auto& b : r.betas) betas.push_back({{"ratio", b.str()}, {"value", b.value()}});
  json trace = json::array();
  for (const auto& p : r.trace) {
    trace.push_back({{"block", p.block},
                     {"beta", p.beta.str()},
                     {"width", p.width},
                     {"feasible", p.feasible},
                     {"distortion", p.distortion},
                     {"evaluation", to_json(p.evaluation)}});
  }
  json out{{"model", r.model_name},
           {"direction", to_string(r.direction)},
           {"delta", r.options.delta},
           {"beta_return_mode", to_string(r.options.beta_return)},
           {"scope", r.scope},
           {"betas", std::move(betas)},
           {"nominal_channels", r.nominal_config.channels},
           {"reduced_channels", r.reduced_config.channels},
           {"macroblock_starts", r.reduced_config.macroblock_starts},
           {"reduced_block_widths", r.reduced_block_widths()},
           {"base_size", size_json(r.base_report)},
           {"reduced_size", size_json(r.reduced_report)},
           {"saving_percent", r.saving_percent()},
           {"baseline", to_json(r.baseline)},
           {"reduced_evaluation", r.reduced_evaluation ? to_json(*r.reduced_evaluation) : json(nullptr)},
           {"exhausted_blocks", r.exhausted_blocks},
           {"diagnostics", r.diagnostics},
           {"trace", std::move(trace)}};
  return out;
}

}  // namespace brief
