#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "brief/oracle.hpp"

// Independent reference implementations. Nothing here calls into the
// accounting, search or surrogate code under test.
namespace brief::testing {

struct SequentialCounts {
  std::int64_t conv = 0;
  std::int64_t bn_learnable = 0;
  std::int64_t bn_buffers = 0;
  std::int64_t fc = 0;

  std::int64_t params() const { return conv + bn_learnable + fc; }
  std::int64_t scalars() const { return params() + bn_buffers; }
};

/// Layer-by-layer count of a plain 3x3 conv+BN stack: depth-1 convs spread
/// evenly over the blocks, one FC head with bias.
SequentialCounts enumerate_sequential(const std::vector<int>& per_layer_widths, int input_channels, int num_classes);

/// Per-layer widths of the sequential CNN (depth-1 conv layers).
std::vector<int> sequential_layer_widths(int depth, const std::vector<int>& block_widths);

/// Learnable parameters of a basic-block residual net with a 7x7 stem,
/// projection shortcuts on strided stages and an FC head.
std::int64_t enumerate_resnet(const std::vector<int>& stage_blocks, int stem_width,
                              const std::vector<int>& stage_widths, int num_classes);

/// Learnable parameters of a depthwise-separable stack. `widths` lists the
/// stem output followed by every pointwise output (14 entries).
std::int64_t enumerate_mobilenet(const std::vector<int>& widths, int num_classes);

/// Width pattern of the reference depthwise-separable net.
std::vector<int> mobilenet_widths();

/// Smallest w in [lo, n] such that feasible(w') holds for every w' in [w, n],
/// found by scanning every width. Returns n + 1 when n itself fails.
int exhaustive_min_width(int lo, int n, const std::function<bool(int)>& feasible);

/// a_max - sum_i w_i * max(0, f_i - r_i)^p with r_i the mean clamped ratio.
double reference_surrogate(const std::vector<std::vector<int>>& current, const std::vector<std::vector<int>>& nominal,
                           double a_max, double p, const std::vector<double>& weights,
                           const std::vector<double>& frontiers);

/// Oracle backed by a plain function, counting calls.
class FunctionOracle final : public Oracle {
 public:
  using Fn = std::function<EvaluationRecord(const ModelSpec&, const ChannelConfig&, const TrainingBudget&)>;
  explicit FunctionOracle(Fn fn, std::size_t parallelism = 1) : fn_(std::move(fn)), parallelism_(parallelism) {}

  EvaluationRecord evaluate(const ModelSpec& model, const ChannelConfig& config,
                            const TrainingBudget& budget) override {
    ++calls_;
    return fn_(model, config, budget);
  }
  std::size_t parallelism() const override { return parallelism_; }
  std::string_view kind() const override { return "function"; }
  std::size_t calls() const { return calls_.load(); }

 private:
  Fn fn_;
  std::size_t parallelism_;
  std::atomic<std::size_t> calls_{0};
};

/// Deterministic splitmix64 stream for hand-rolled property generators.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  /// Uniform integer in [lo, hi].
  std::int64_t between(std::int64_t lo, std::int64_t hi);
  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi);

 private:
  std::uint64_t state_;
};

/// Fresh empty directory under the system temp dir.
std::string scratch_dir(const std::string& tag);

/// Absolute path of tests/fixtures/<name>.
std::string fixture(const std::string& name);

}  // namespace brief::testing
