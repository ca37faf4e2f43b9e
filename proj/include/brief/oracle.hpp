#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "brief/arch.hpp"

namespace brief {

/// Retraining recipe attached to every evaluation.
struct TrainingBudget {
  int epochs = 20;
  double lr_initial = 0.1;
  std::vector<int> lr_milestones{8, 16};
  double lr_divisor = 10.0;
  std::string optimizer = "sgd";
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int batch_size = 256;
  std::uint64_t seed = 0;

  void validate() const;

  /// Shortened ImageNet recipe used inside the search: 20 epochs, /10 at 8 and 16.
  static TrainingBudget search_preset();
  /// Full ImageNet recipe: 90 epochs, /10 at 30 and 60.
  static TrainingBudget final_preset();
  /// CIFAR recipe: batch 128, /10 at 50% and 75% of `epochs`.
  static TrainingBudget cifar_preset(int epochs);

  /// Canonical text covering every field; equal budgets give equal text.
  std::string fingerprint() const;

  friend bool operator==(const TrainingBudget&, const TrainingBudget&) = default;
};

enum class EvalStatus { ok, failed, timeout };

std::string_view to_string(EvalStatus status);
EvalStatus parse_eval_status(std::string_view text);

/// One oracle call.
struct EvaluationRecord {
  std::string config_digest;
  std::vector<int> channels;
  std::vector<std::size_t> macroblock_starts;
  TrainingBudget budget;
  double top1 = 0.0;
  std::optional<double> top5;
  double wall_seconds = 0.0;
  EvalStatus status = EvalStatus::failed;
  /// Free-form diagnostic for failed evaluations; empty on success.
  std::string message;

  bool ok() const { return status == EvalStatus::ok; }
  /// Throws std::invalid_argument when 0 <= top1 <= top5 <= 1 does not hold.
  void validate() const;

  friend bool operator==(const EvaluationRecord&, const EvaluationRecord&) = default;
};

nlohmann::json to_json(const TrainingBudget& budget);
TrainingBudget budget_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EvaluationRecord& record);
EvaluationRecord record_from_json(const nlohmann::json& j);

/// Architecture identity: layer kinds, kernels, strides, slot bindings and
/// dataset/class count. The model's display name is not part of it.
std::string model_identity(const ModelSpec& model);

/// Stable 64-bit FNV-1a digest (16 hex chars) of (config, model identity).
std::string config_digest(const ModelSpec& model, const ChannelConfig& config);

/// D(n', n) = baseline - candidate; negative when the candidate improves.
double distortion(double baseline_top1, double candidate_top1);

/// Raised by the replay oracle when the ledger has no matching record.
class MissingEvaluation : public std::runtime_error {
 public:
  explicit MissingEvaluation(const std::string& digest)
      : std::runtime_error("missing evaluation for digest " + digest), digest_(digest) {}
  const std::string& digest() const { return digest_; }

 private:
  std::string digest_;
};

/// Accuracy oracle queried by the search. `model` supplies the identity and
/// nominal layout; `config` is the candidate channel vector.
///
/// Implementations report trainer-side problems through the record status
/// rather than by throwing. evaluate() may be called from several threads
/// at once, up to parallelism().
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual EvaluationRecord evaluate(const ModelSpec& model, const ChannelConfig& config,
                                    const TrainingBudget& budget) = 0;
  virtual std::size_t parallelism() const { return 1; }
  virtual std::string_view kind() const = 0;
};

/// Parameters of the analytic stand-in for retraining:
///   top1 = a_max - sum_i weights[i] * max(0, frontiers[i] - ratio_i)^exponent
/// where ratio_i is the mean, over block i's entries, of current / nominal
/// width clamped to 1.
struct SurrogateParams {
  double a_max = 0.91;
  double exponent = 2.0;
  std::vector<double> weights;
  std::vector<double> frontiers;

  void validate(std::size_t num_blocks) const;

  /// Descending-density profile: frontiers [0.95, 0.85, 0.55] for three
  /// blocks (linearly resampled for other counts), weight 4 everywhere.
  static SurrogateParams defaults(std::size_t num_blocks);
};

/// Per-block width ratio against the nominal partition (entries clamped to 1).
std::vector<double> block_ratios(const ChannelConfig& config, const MacroblockPartition& nominal);

double surrogate_accuracy(const ChannelConfig& config, const MacroblockPartition& nominal,
                          const SurrogateParams& params);

/// Deterministic oracle backed by surrogate_accuracy(). The partition is the
/// reference layout ratios are measured against, so it must come from the
/// original (unscaled) model.
class SurrogateOracle final : public Oracle {
 public:
  SurrogateOracle(MacroblockPartition nominal, SurrogateParams params);

  EvaluationRecord evaluate(const ModelSpec& model, const ChannelConfig& config,
                            const TrainingBudget& budget) override;
  std::size_t parallelism() const override { return parallelism_; }
  std::string_view kind() const override { return "surrogate"; }

  void set_parallelism(std::size_t n) { parallelism_ = n == 0 ? 1 : n; }
  const SurrogateParams& params() const { return params_; }

 private:
  MacroblockPartition nominal_;
  SurrogateParams params_;
  std::size_t parallelism_ = 1;
};

/// Fills digest/config/budget fields shared by every oracle.
EvaluationRecord make_record(const ModelSpec& model, const ChannelConfig& config, const TrainingBudget& budget);

}  // namespace brief
