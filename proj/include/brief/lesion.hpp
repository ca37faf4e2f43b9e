#pragma once

#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "brief/arch.hpp"
#include "brief/oracle.hpp"
#include "brief/ratio.hpp"
#include "brief/rdcurve.hpp"

namespace brief {

enum class LesionKind { constant, proportional, macroblock_scale };

std::string_view to_string(LesionKind kind);
LesionKind parse_lesion_kind(std::string_view text);

/// One lesion study. For constant sweeps `values` holds the integer widths
/// c; otherwise it holds factors k in (0, 1]. `indices` are channel indices
/// for one-hot sweeps and block indices for macroblock sweeps.
struct SweepPlan {
  LesionKind kind = LesionKind::constant;
  std::vector<Ratio> values;
  std::vector<std::size_t> indices;
  TrainingBudget budget;

  void validate(const ModelSpec& model) const;
};

struct OneHotPoint {
  std::size_t index = 0;
  Ratio parameter;
  ChannelConfig config;
  EvaluationRecord record;
};

/// One evaluation per (index, value) pair in index-major order.
std::vector<OneHotPoint> run_onehot_sweep(const ModelSpec& model, const SweepPlan& plan, Oracle& oracle);

struct BlockRDPoint {
  std::size_t block_id = 0;
  Ratio k;
  RDPoint point;
  EvalStatus status = EvalStatus::ok;
};

/// For every block in `blocks` (all blocks when empty) and every k, scales
/// that block alone. Result is grouped by block, points in the order of
/// `k_values`.
std::vector<std::vector<BlockRDPoint>> run_macroblock_rd_sweep(const ModelSpec& model,
                                                               const MacroblockPartition& partition,
                                                               const std::vector<Ratio>& k_values, Oracle& oracle,
                                                               const TrainingBudget& budget,
                                                               const std::vector<std::size_t>& blocks = {});

/// Default one-hot sweep range 1..N-1. The classifier input width n_N is
/// left out; name it explicitly to lesion it.
std::vector<std::size_t> default_lesion_indices(const ModelSpec& model);

/// onehot.csv: index,parameter,top1,status
void write_onehot_csv(std::span<const OneHotPoint> points, const std::filesystem::path& path);
/// rd_points.csv: block_id,k,params,size_bytes,top1
void write_rd_points_csv(const std::vector<std::vector<BlockRDPoint>>& groups, const std::filesystem::path& path);

}  // namespace brief
