#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "brief/accounting.hpp"
#include "brief/arch.hpp"
#include "brief/oracle.hpp"
#include "brief/ratio.hpp"
#include "brief/search.hpp"

namespace brief {

/// One point of a rate-distortion curve: model size against accuracy.
struct RDPoint {
  std::string label;
  std::int64_t size_bytes = 0;
  std::int64_t params = 0;
  double top1 = 0.0;
  std::string config_digest;

  friend bool operator==(const RDPoint&, const RDPoint&) = default;
};

RDPoint make_rd_point(std::string label, const ModelSpec& model, const ChannelConfig& config,
                      const EvaluationRecord& record, const SizeOptions& size = {});

/// alpha-scaling baseline: one point per alpha, sorted by size ascending.
/// Points whose evaluation fails are left out (the failure is still in the
/// oracle's ledger).
std::vector<RDPoint> build_alpha_curve(const ModelSpec& model, const std::vector<Ratio>& alphas, Oracle& oracle,
                                       const TrainingBudget& budget);

/// For each alpha: scale the whole model, then run the backward search on
/// the scaled model. Distortion is measured against the alpha-scaled model.
std::vector<RDPoint> build_alpha_plus_brief_curve(const ModelSpec& model, const std::vector<Ratio>& alphas,
                                                  const SearchOptions& options, Oracle& oracle,
                                                  const TrainingBudget& budget);

/// CSV with header label,size_bytes,params,top1,config_digest.
void export_curve(std::span<const RDPoint> points, const std::filesystem::path& path);
std::vector<RDPoint> import_curve(const std::filesystem::path& path);

/// Two whitespace-separated columns: size in KiB, top1 in percent.
void export_gnuplot(std::span<const RDPoint> points, const std::filesystem::path& path);

/// Shortest round-trip decimal text for a double.
std::string format_double(double value);

}  // namespace brief
