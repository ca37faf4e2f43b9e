#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "brief/oracle.hpp"

namespace brief {

/// Append-only JSON-lines record of every oracle call.
///
/// Lookups return the newest record for a digest. Corrupt lines found while
/// loading are skipped and reported through warnings(). A ledger without a
/// path lives in memory only.
class Ledger {
 public:
  Ledger() = default;
  /// Loads existing records; new records are appended to the file unless
  /// `writable` is false, in which case appends stay in memory.
  explicit Ledger(std::filesystem::path path, bool writable = true);

  Ledger(const Ledger&) = delete;
  Ledger& operator=(const Ledger&) = delete;

  void append(const EvaluationRecord& record);

  std::optional<EvaluationRecord> lookup(const std::string& digest) const;
  /// Newest record for `digest` evaluated under exactly `budget`.
  std::optional<EvaluationRecord> lookup(const std::string& digest, const TrainingBudget& budget) const;

  std::size_t size() const;
  std::vector<EvaluationRecord> records() const;
  std::vector<std::string> warnings() const;
  const std::optional<std::filesystem::path>& path() const { return path_; }

 private:
  void index(EvaluationRecord record);

  std::optional<std::filesystem::path> path_;
  std::ofstream out_;
  mutable std::mutex mutex_;
  std::vector<EvaluationRecord> records_;
  std::multimap<std::string, std::size_t> by_digest_;
  std::vector<std::string> warnings_;
};

/// Serves every request from the ledger and never trains. A miss raises
/// MissingEvaluation.
class ReplayOracle final : public Oracle {
 public:
  explicit ReplayOracle(const Ledger& ledger) : ledger_(ledger) {}

  EvaluationRecord evaluate(const ModelSpec& model, const ChannelConfig& config,
                            const TrainingBudget& budget) override;
  std::size_t parallelism() const override { return 16; }
  std::string_view kind() const override { return "replay"; }

 private:
  const Ledger& ledger_;
};

/// Forwards to `inner` and appends every result to the ledger. With resume
/// enabled, successful records already in the ledger are reused.
class RecordingOracle final : public Oracle {
 public:
  RecordingOracle(Oracle& inner, Ledger& ledger, bool resume = true)
      : inner_(inner), ledger_(ledger), resume_(resume) {}

  EvaluationRecord evaluate(const ModelSpec& model, const ChannelConfig& config,
                            const TrainingBudget& budget) override;
  std::size_t parallelism() const override { return inner_.parallelism(); }
  std::string_view kind() const override { return inner_.kind(); }

  /// Calls forwarded to the inner oracle.
  std::size_t forwarded() const;

 private:
  Oracle& inner_;
  Ledger& ledger_;
  bool resume_;
  mutable std::mutex mutex_;
  std::size_t forwarded_ = 0;
};

}  // namespace brief
