#include "brief/rdcurve.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <optional>

#include "detail/csv.hpp"
#include "detail/parallel.hpp"

namespace brief {

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw std::runtime_error("cannot format number");
  return std::string(buf, ptr);
}

RDPoint make_rd_point(std::string label, const ModelSpec& model, const ChannelConfig& config,
                      const EvaluationRecord& record, const SizeOptions& size) {
  SizeReport report = count_parameters(model, config, size);
  return RDPoint{std::move(label), report.size_bytes, report.parameter_count, record.top1,
                 config_digest(model, config)};
}

namespace {

void check_alphas(const std::vector<Ratio>& alphas) {
  for (const auto& a : alphas) {
    if (a.is_zero() || a > Ratio(1)) throw std::invalid_argument("alpha must lie in (0, 1], got " + a.str());
  }
}

std::string alpha_label(const Ratio& alpha) { return "alpha=" + format_double(alpha.value()); }

std::vector<RDPoint> collect(std::vector<std::optional<RDPoint>>& slots) {
  std::vector<RDPoint> points;
  for (auto& s : slots) {
    if (s) points.push_back(std::move(*s));
  }
  std::stable_sort(points.begin(), points.end(),
                   [](const RDPoint& a, const RDPoint& b) { return a.size_bytes < b.size_bytes; });
  return points;
}

}  // namespace

std::vector<RDPoint> build_alpha_curve(const ModelSpec& model, const std::vector<Ratio>& alphas, Oracle& oracle,
                                       const TrainingBudget& budget) {
  check_alphas(alphas);
  budget.validate();
  std::vector<std::optional<RDPoint>> slots(alphas.size());
  detail::parallel_for(alphas.size(), oracle.parallelism(), [&](std::size_t i) {
    ChannelConfig config = apply_alpha_scaling(model.nominal, alphas[i]);
    EvaluationRecord record = oracle.evaluate(model, config, budget);
    if (!record.ok()) {
      std::cerr << "warning: " << alpha_label(alphas[i]) << " evaluation " << to_string(record.status) << '\n';
      return;
    }
    slots[i] = make_rd_point(alpha_label(alphas[i]), model, config, record);
  });
  return collect(slots);
}

std::vector<RDPoint> build_alpha_plus_brief_curve(const ModelSpec& model, const std::vector<Ratio>& alphas,
                                                  const SearchOptions& options, Oracle& oracle,
                                                  const TrainingBudget& budget) {
  check_alphas(alphas);
  options.validate();
  budget.validate();
  std::vector<std::optional<RDPoint>> slots(alphas.size());
  detail::parallel_for(alphas.size(), oracle.parallelism(), [&](std::size_t i) {
    const ModelSpec scaled = model.with_channels(apply_alpha_scaling(model.nominal, alphas[i]));
    const MacroblockPartition partition = partition_macroblocks(scaled);
    try {
      ReductionResult r = brief_backward_reduction(scaled, partition, options, oracle, budget);
      if (!r.reduced_evaluation) return;
      slots[i] = make_rd_point(alpha_label(alphas[i]) + "+brief", model, r.reduced_config, *r.reduced_evaluation);
    } catch (const BaselineUnavailable& e) {
      std::cerr << "warning: " << alpha_label(alphas[i]) << "+brief skipped: " << e.what() << '\n';
    }
  });
  return collect(slots);
}

void export_curve(std::span<const RDPoint> points, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "label,size_bytes,params,top1,config_digest\n";
  for (const auto& p : points) {
    out << detail::csv_field(p.label) << ',' << p.size_bytes << ',' << p.params << ',' << format_double(p.top1) << ','
        << detail::csv_field(p.config_digest) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::vector<RDPoint> import_curve(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || detail::split_csv_line(line) !=
                                     std::vector<std::string>{"label", "size_bytes", "params", "top1", "config_digest"})
    throw std::invalid_argument(path.string() + ": unexpected curve header");
  std::vector<RDPoint> points;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = detail::split_csv_line(line);
    if (f.size() != 5) throw std::invalid_argument(path.string() + ": expected 5 fields in '" + line + "'");
    RDPoint p;
    p.label = f[0];
    p.size_bytes = std::stoll(f[1]);
    p.params = std::stoll(f[2]);
    auto [ptr, ec] = std::from_chars(f[3].data(), f[3].data() + f[3].size(), p.top1);
    if (ec != std::errc{} || ptr != f[3].data() + f[3].size())
      throw std::invalid_argument(path.string() + ": bad top1 '" + f[3] + "'");
    p.config_digest = f[4];
    points.push_back(std::move(p));
  }
  return points;
}

void export_gnuplot(std::span<const RDPoint> points, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# size_kb top1_percent\n";
  for (const auto& p : points) {
    out << format_double(static_cast<double>(p.size_bytes) / static_cast<double>(kBytesPerKiB)) << ' '
        << format_double(p.top1 * 100.0) << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace brief
