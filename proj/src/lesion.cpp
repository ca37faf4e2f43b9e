#include "brief/lesion.hpp"

#include <fstream>

#include "detail/parallel.hpp"

namespace brief {

std::string_view to_string(LesionKind kind) {
  switch (kind) {
    case LesionKind::constant:
      return "constant";
    case LesionKind::proportional:
      return "proportional";
    case LesionKind::macroblock_scale:
      return "macroblock_scale";
  }
  return "constant";
}

LesionKind parse_lesion_kind(std::string_view text) {
  if (text == "constant") return LesionKind::constant;
  if (text == "proportional") return LesionKind::proportional;
  if (text == "macroblock_scale" || text == "macroblock") return LesionKind::macroblock_scale;
  throw std::invalid_argument("lesion kind must be constant, proportional or macroblock_scale, got '" +
                              std::string(text) + "'");
}

void SweepPlan::validate(const ModelSpec& model) const {
  if (values.empty()) throw std::invalid_argument("sweep plan needs at least one parameter value");
  for (const auto& v : values) {
    if (kind == LesionKind::constant) {
      if (!v.is_integer() || v.is_zero()) throw std::invalid_argument("constant lesion values must be integers >= 1");
    } else if (v.is_zero() || v > Ratio(1)) {
      throw std::invalid_argument("lesion factor k must lie in (0, 1], got " + v.str());
    }
  }
  const std::size_t limit = kind == LesionKind::macroblock_scale ? model.nominal.num_blocks() : model.nominal.channels.size();
  for (auto i : indices) {
    if (kind != LesionKind::macroblock_scale && i == 0) throw std::invalid_argument("channel index 0 (input) cannot be lesioned");
    if (i >= limit) throw std::invalid_argument("sweep index " + std::to_string(i) + " out of range");
  }
  budget.validate();
}

std::vector<std::size_t> default_lesion_indices(const ModelSpec& model) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i + 1 < model.nominal.channels.size(); ++i) out.push_back(i);
  return out;
}

std::vector<OneHotPoint> run_onehot_sweep(const ModelSpec& model, const SweepPlan& plan, Oracle& oracle) {
  if (plan.kind == LesionKind::macroblock_scale)
    throw std::invalid_argument("one-hot sweeps take constant or proportional plans");
  plan.validate(model);

  std::vector<OneHotPoint> points;
  for (auto index : plan.indices) {
    for (const auto& v : plan.values) {
      OneHotPoint p;
      p.index = index;
      p.parameter = v;
      p.config = plan.kind == LesionKind::constant
                     ? apply_constant_lesion(model.nominal, index, static_cast<int>(v.num()))
                     : apply_proportional_lesion(model.nominal, index, v);
      points.push_back(std::move(p));
    }
  }
  detail::parallel_for(points.size(), oracle.parallelism(),
                       [&](std::size_t i) { points[i].record = oracle.evaluate(model, points[i].config, plan.budget); });
  return points;
}

std::vector<std::vector<BlockRDPoint>> run_macroblock_rd_sweep(const ModelSpec& model,
                                                               const MacroblockPartition& partition,
                                                               const std::vector<Ratio>& k_values, Oracle& oracle,
                                                               const TrainingBudget& budget,
                                                               const std::vector<std::size_t>& blocks) {
  for (auto b : blocks) {
    if (b >= partition.size()) throw std::invalid_argument("block index " + std::to_string(b) + " out of range");
  }
  for (const auto& k : k_values) {
    if (k.is_zero() || k > Ratio(1)) throw std::invalid_argument("k must lie in (0, 1], got " + k.str());
  }
  budget.validate();

  struct Job {
    std::size_t block;
    std::size_t slot;
    ChannelConfig config;
  };
  std::vector<std::size_t> selected = blocks;
  if (selected.empty()) {
    for (std::size_t b = 0; b < partition.size(); ++b) selected.push_back(b);
  }
  std::vector<std::vector<BlockRDPoint>> groups(selected.size());
  std::vector<Job> jobs;
  for (std::size_t g = 0; g < selected.size(); ++g) {
    groups[g].resize(k_values.size());
    for (std::size_t j = 0; j < k_values.size(); ++j) {
      jobs.push_back(Job{g, j, apply_macroblock_scale(model.nominal, partition, selected[g], k_values[j])});
    }
  }
  detail::parallel_for(jobs.size(), oracle.parallelism(), [&](std::size_t i) {
    const Job& job = jobs[i];
    EvaluationRecord record = oracle.evaluate(model, job.config, budget);
    const Ratio& k = k_values[job.slot];
    const std::size_t block = selected[job.block];
    BlockRDPoint& out = groups[job.block][job.slot];
    out.block_id = block;
    out.k = k;
    out.status = record.status;
    out.point = make_rd_point("b" + std::to_string(block) + ":k=" + k.str(), model, job.config, record);
  });
  return groups;
}

void write_onehot_csv(std::span<const OneHotPoint> points, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "index,parameter,top1,status\n";
  for (const auto& p : points) {
    out << p.index << ',' << p.parameter.str() << ',' << format_double(p.record.top1) << ','
        << to_string(p.record.status) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_rd_points_csv(const std::vector<std::vector<BlockRDPoint>>& groups, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "block_id,k,params,size_bytes,top1\n";
  for (const auto& group : groups) {
    for (const auto& p : group) {
      out << p.block_id << ',' << p.k.str() << ',' << p.point.params << ',' << p.point.size_bytes << ','
          << format_double(p.point.top1) << '\n';
    }
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace brief
