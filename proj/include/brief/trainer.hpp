#pragma once

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "brief/oracle.hpp"

namespace brief {

// External trainer protocol: one JSON object per line over the child's
// stdin/stdout.
//
// request:  run_id, channels, macroblock_starts, dataset, num_classes, epochs,
//           lr_initial, lr_milestones, lr_divisor, momentum, weight_decay,
//           batch_size, seed
// response: run_id, status ("ok" | "failed" | "timeout"), top1, top5,
//           wall_seconds
//
// Unknown response fields are ignored; run_id must echo the request.

nlohmann::ordered_json make_trainer_request(const std::string& run_id, const ModelSpec& model,
                                            const ChannelConfig& config, const TrainingBudget& budget);

struct TrainerReply {
  std::string run_id;
  EvalStatus status = EvalStatus::failed;
  double top1 = 0.0;
  std::optional<double> top5;
  std::optional<double> wall_seconds;
};

/// Throws std::invalid_argument on malformed input.
TrainerReply parse_trainer_reply(std::string_view line);

struct TrainerOptions {
  /// argv of the trainer program; looked up on PATH.
  std::vector<std::string> command;
  std::size_t parallelism = 1;
  /// Per-evaluation reply deadline; <= 0 waits forever.
  double timeout_seconds = 0.0;
};

/// Dispatches evaluations to long-lived trainer processes, one per worker
/// slot. A dead or silent trainer yields status timeout, a garbled reply
/// yields status failed; the slot's process is restarted on next use.
class ExternalTrainerOracle final : public Oracle {
 public:
  explicit ExternalTrainerOracle(TrainerOptions options);
  ~ExternalTrainerOracle() override;

  ExternalTrainerOracle(const ExternalTrainerOracle&) = delete;
  ExternalTrainerOracle& operator=(const ExternalTrainerOracle&) = delete;

  EvaluationRecord evaluate(const ModelSpec& model, const ChannelConfig& config,
                            const TrainingBudget& budget) override;
  std::size_t parallelism() const override { return options_.parallelism; }
  std::string_view kind() const override { return "external"; }

  /// Requests written to trainer processes so far.
  std::size_t dispatched() const { return dispatched_.load(); }

 private:
  struct Worker {
    int pid = -1;
    int fd = -1;
    std::string pending;
  };

  std::size_t acquire();
  void release(std::size_t slot);
  bool ensure_running(Worker& w, std::string& error);
  void stop(Worker& w, bool force);
  /// Returns false on timeout or EOF.
  bool read_line(Worker& w, std::string& line, std::string& error);

  TrainerOptions options_;
  std::vector<Worker> workers_;
  std::vector<bool> busy_;
  std::mutex mutex_;
  std::condition_variable freed_;
  std::atomic<std::size_t> dispatched_{0};
  std::atomic<std::uint64_t> sequence_{0};
};

}  // namespace brief
