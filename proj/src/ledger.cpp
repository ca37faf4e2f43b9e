#include "brief/ledger.hpp"

#include <iostream>

namespace brief {

Ledger::Ledger(std::filesystem::path path, bool writable) : path_(std::move(path)) {
  if (writable && path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
  if (std::ifstream in(*path_); in) {
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
      ++number;
      if (line.empty()) continue;
      try {
        auto record = record_from_json(nlohmann::json::parse(line));
        index(std::move(record));
      } catch (const std::exception& e) {
        std::string w = path_->string() + ":" + std::to_string(number) + ": skipped corrupt ledger line (" + e.what() + ")";
        std::cerr << "warning: " << w << '\n';
        warnings_.push_back(std::move(w));
      }
    }
  }
  if (!writable) return;
  out_.open(*path_, std::ios::app);
  if (!out_) throw std::runtime_error("cannot open ledger " + path_->string() + " for appending");
}

void Ledger::index(EvaluationRecord record) {
  by_digest_.emplace(record.config_digest, records_.size());
  records_.push_back(std::move(record));
}

void Ledger::append(const EvaluationRecord& record) {
  std::string line = to_json(record).dump() + "\n";
  std::lock_guard lock(mutex_);
  if (out_.is_open()) {
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    out_.flush();
    if (!out_) throw std::runtime_error("failed to append to ledger " + path_->string());
  }
  index(record);
}

std::optional<EvaluationRecord> Ledger::lookup(const std::string& digest) const {
  std::lock_guard lock(mutex_);
  auto [lo, hi] = by_digest_.equal_range(digest);
  std::optional<std::size_t> newest;
  for (auto it = lo; it != hi; ++it) newest = newest ? std::max(*newest, it->second) : it->second;
  if (!newest) return std::nullopt;
  return records_[*newest];
}

std::optional<EvaluationRecord> Ledger::lookup(const std::string& digest, const TrainingBudget& budget) const {
  std::lock_guard lock(mutex_);
  auto [lo, hi] = by_digest_.equal_range(digest);
  std::optional<std::size_t> newest;
  for (auto it = lo; it != hi; ++it) {
    if (records_[it->second].budget != budget) continue;
    newest = newest ? std::max(*newest, it->second) : it->second;
  }
  if (!newest) return std::nullopt;
  return records_[*newest];
}

std::size_t Ledger::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

std::vector<EvaluationRecord> Ledger::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::vector<std::string> Ledger::warnings() const {
  std::lock_guard lock(mutex_);
  return warnings_;
}

EvaluationRecord ReplayOracle::evaluate(const ModelSpec& model, const ChannelConfig& config,
                                        const TrainingBudget& budget) {
  const std::string digest = config_digest(model, config);
  auto hit = ledger_.lookup(digest, budget);
  if (!hit) throw MissingEvaluation(digest);
  return *hit;
}

EvaluationRecord RecordingOracle::evaluate(const ModelSpec& model, const ChannelConfig& config,
                                           const TrainingBudget& budget) {
  if (resume_) {
    auto hit = ledger_.lookup(config_digest(model, config), budget);
    if (hit && hit->ok()) return *hit;
  }
  {
    std::lock_guard lock(mutex_);
    ++forwarded_;
  }
  EvaluationRecord record = inner_.evaluate(model, config, budget);
  ledger_.append(record);
  return record;
}

std::size_t RecordingOracle::forwarded() const {
  std::lock_guard lock(mutex_);
  return forwarded_;
}

}  // namespace brief
