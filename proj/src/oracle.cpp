#include "brief/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace brief {

using nlohmann::json;

void TrainingBudget::validate() const {
  if (epochs < 1) throw std::invalid_argument("budget epochs must be >= 1");
  for (std::size_t i = 0; i < lr_milestones.size(); ++i) {
    if (lr_milestones[i] < 1 || lr_milestones[i] >= epochs)
      throw std::invalid_argument("lr milestones must lie in [1, epochs)");
    if (i > 0 && lr_milestones[i] <= lr_milestones[i - 1])
      throw std::invalid_argument("lr milestones must be strictly increasing");
  }
  if (!(lr_initial > 0) || !(lr_divisor > 0)) throw std::invalid_argument("learning rate and divisor must be positive");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (momentum < 0 || weight_decay < 0) throw std::invalid_argument("momentum and weight decay must be >= 0");
}

TrainingBudget TrainingBudget::search_preset() { return TrainingBudget{}; }

TrainingBudget TrainingBudget::final_preset() {
  TrainingBudget b;
  b.epochs = 90;
  b.lr_milestones = {30, 60};
  return b;
}

TrainingBudget TrainingBudget::cifar_preset(int epochs) {
  if (epochs < 4) throw std::invalid_argument("CIFAR recipe needs at least 4 epochs");
  TrainingBudget b;
  b.epochs = epochs;
  b.lr_milestones = {epochs / 2, epochs * 3 / 4};
  b.batch_size = 128;
  return b;
}

std::string TrainingBudget::fingerprint() const { return to_json(*this).dump(); }

std::string_view to_string(EvalStatus status) {
  switch (status) {
    case EvalStatus::ok:
      return "ok";
    case EvalStatus::failed:
      return "failed";
    case EvalStatus::timeout:
      return "timeout";
  }
  return "failed";
}

EvalStatus parse_eval_status(std::string_view text) {
  if (text == "ok") return EvalStatus::ok;
  if (text == "failed") return EvalStatus::failed;
  if (text == "timeout") return EvalStatus::timeout;
  throw std::invalid_argument("unknown evaluation status '" + std::string(text) + "'");
}

void EvaluationRecord::validate() const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(top1)) throw std::invalid_argument("top1 must lie in [0, 1]");
  if (top5 && (!in_unit(*top5) || *top5 < top1)) throw std::invalid_argument("top5 must lie in [top1, 1]");
  if (wall_seconds < 0) throw std::invalid_argument("wall_seconds must be >= 0");
}

json to_json(const TrainingBudget& b) {
  return json{{"epochs", b.epochs},         {"lr_initial", b.lr_initial},
              {"lr_milestones", b.lr_milestones}, {"lr_divisor", b.lr_divisor},
              {"optimizer", b.optimizer},   {"momentum", b.momentum},
              {"weight_decay", b.weight_decay}, {"batch_size", b.batch_size},
              {"seed", b.seed}};
}

TrainingBudget budget_from_json(const json& j) {
  TrainingBudget b;
  b.epochs = j.at("epochs").get<int>();
  b.lr_initial = j.at("lr_initial").get<double>();
  b.lr_milestones = j.at("lr_milestones").get<std::vector<int>>();
  b.lr_divisor = j.at("lr_divisor").get<double>();
  b.optimizer = j.value("optimizer", std::string("sgd"));
  b.momentum = j.at("momentum").get<double>();
  b.weight_decay = j.at("weight_decay").get<double>();
  b.batch_size = j.at("batch_size").get<int>();
  b.seed = j.at("seed").get<std::uint64_t>();
  return b;
}

json to_json(const EvaluationRecord& r) {
  json j{{"config_digest", r.config_digest},
         {"channels", r.channels},
         {"macroblock_starts", r.macroblock_starts},
         {"budget", to_json(r.budget)},
         {"top1", r.top1},
         {"top5", r.top5 ? json(*r.top5) : json(nullptr)},
         {"wall_seconds", r.wall_seconds},
         {"status", to_string(r.status)}};
  if (!r.message.empty()) j["message"] = r.message;
  return j;
}

EvaluationRecord record_from_json(const json& j) {
  EvaluationRecord r;
  r.config_digest = j.at("config_digest").get<std::string>();
  r.channels = j.at("channels").get<std::vector<int>>();
  r.macroblock_starts = j.at("macroblock_starts").get<std::vector<std::size_t>>();
  r.budget = budget_from_json(j.at("budget"));
  r.top1 = j.at("top1").get<double>();
  if (j.contains("top5") && !j.at("top5").is_null()) r.top5 = j.at("top5").get<double>();
  r.wall_seconds = j.at("wall_seconds").get<double>();
  r.status = parse_eval_status(j.at("status").get<std::string>());
  r.message = j.value("message", std::string());
  return r;
}

std::string model_identity(const ModelSpec& model) {
  std::ostringstream out;
  out << "dataset=" << model.metadata.dataset << ";classes=" << model.metadata.num_classes
      << ";res=" << model.metadata.input_resolution << ";layers=";
  for (const auto& layer : model.layers) {
    if (const auto* c = std::get_if<ConvLayer>(&layer)) {
      out << "C" << c->kernel_h << 'x' << c->kernel_w << 's' << c->stride << (c->depthwise ? "d" : "")
          << (c->has_bias ? "b" : "") << (c->shortcut ? "r" : "") << '@' << c->in_slot << '>' << c->out_slot;
    } else if (const auto* bn = std::get_if<BatchNormLayer>(&layer)) {
      out << "B@" << bn->slot << (bn->shortcut ? "r" : "");
    } else if (const auto* p = std::get_if<PoolLayer>(&layer)) {
      out << (p->kind == PoolKind::max ? "P" : "A") << p->window;
    } else if (std::holds_alternative<GlobalAvgPoolLayer>(layer)) {
      out << "G";
    } else if (const auto* fc = std::get_if<FullyConnectedLayer>(&layer)) {
      out << "F@" << fc->in_slot << '>' << fc->out_features << (fc->has_bias ? "b" : "");
    }
    out << ',';
  }
  return out.str();
}

std::string config_digest(const ModelSpec& model, const ChannelConfig& config) {
  std::ostringstream canon;
  canon << "v1|n=";
  for (int c : config.channels) canon << c << ',';
  canon << "|b=";
  for (auto s : config.macroblock_starts) canon << s << ',';
  canon << '|' << model_identity(model);

  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : canon.str()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

double distortion(double baseline_top1, double candidate_top1) { return baseline_top1 - candidate_top1; }

void SurrogateParams::validate(std::size_t num_blocks) const {
  if (weights.size() != num_blocks || frontiers.size() != num_blocks)
    throw std::invalid_argument("surrogate needs one weight and one frontier per macroblock (" +
                                std::to_string(num_blocks) + ")");
  if (!(a_max >= 0.0 && a_max <= 1.0)) throw std::invalid_argument("surrogate a_max must lie in [0, 1]");
  if (!(exponent > 0.0)) throw std::invalid_argument("surrogate exponent must be positive");
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("surrogate weights must be >= 0");
  }
  for (double f : frontiers) {
    if (!(f >= 0.0 && f <= 1.0)) throw std::invalid_argument("surrogate frontiers must lie in [0, 1]");
  }
}

SurrogateParams SurrogateParams::defaults(std::size_t num_blocks) {
  static constexpr double profile[] = {0.95, 0.85, 0.55};
  SurrogateParams p;
  p.weights.assign(num_blocks, 4.0);
  for (std::size_t i = 0; i < num_blocks; ++i) {
    double t = num_blocks == 1 ? 2.0 : 2.0 * static_cast<double>(i) / static_cast<double>(num_blocks - 1);
    auto lo = static_cast<std::size_t>(std::floor(t));
    if (lo >= 2) {
      p.frontiers.push_back(profile[2]);
    } else {
      double f = t - static_cast<double>(lo);
      p.frontiers.push_back(profile[lo] + f * (profile[lo + 1] - profile[lo]));
    }
  }
  return p;
}

std::vector<double> block_ratios(const ChannelConfig& config, const MacroblockPartition& nominal) {
  std::vector<double> ratios;
  ratios.reserve(nominal.size());
  for (std::size_t b = 0; b < nominal.size(); ++b) {
    const auto& block = nominal.blocks[b];
    if (block.end_channel > config.channels.size())
      throw std::invalid_argument("config does not cover the nominal partition");
    double sum = 0.0;
    for (std::size_t i = block.first_channel; i < block.end_channel; ++i) {
      double r = static_cast<double>(config.channels[i]) /
                 static_cast<double>(nominal.block_channels[b][i - block.first_channel]);
      sum += std::min(r, 1.0);
    }
    ratios.push_back(sum / static_cast<double>(block.end_channel - block.first_channel));
  }
  return ratios;
}

double surrogate_accuracy(const ChannelConfig& config, const MacroblockPartition& nominal,
                          const SurrogateParams& params) {
  params.validate(nominal.size());
  const auto ratios = block_ratios(config, nominal);
  double penalty = 0.0;
  for (std::size_t b = 0; b < ratios.size(); ++b) {
    double gap = std::max(0.0, params.frontiers[b] - ratios[b]);
    penalty += params.weights[b] * std::pow(gap, params.exponent);
  }
  return std::clamp(params.a_max - penalty, 0.0, 1.0);
}

EvaluationRecord make_record(const ModelSpec& model, const ChannelConfig& config, const TrainingBudget& budget) {
  EvaluationRecord r;
  r.config_digest = config_digest(model, config);
  r.channels = config.channels;
  r.macroblock_starts = config.macroblock_starts;
  r.budget = budget;
  return r;
}

SurrogateOracle::SurrogateOracle(MacroblockPartition nominal, SurrogateParams params)
    : nominal_(std::move(nominal)), params_(std::move(params)) {
  params_.validate(nominal_.size());
}

EvaluationRecord SurrogateOracle::evaluate(const ModelSpec& model, const ChannelConfig& config,
                                           const TrainingBudget& budget) {
  EvaluationRecord r = make_record(model, config, budget);
  r.top1 = surrogate_accuracy(config, nominal_, params_);
  r.status = EvalStatus::ok;
  return r;
}

}  // namespace brief
