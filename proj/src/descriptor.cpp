#include "brief/descriptor.hpp"

#include <fstream>
#include <stdexcept>

#include "brief/zoo.hpp"
#include "detail/partition.hpp"

namespace brief {
namespace {

using nlohmann::json;

[[noreturn]] void reject(const std::string& message) { throw std::invalid_argument("model descriptor: " + message); }

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

Ratio ratio_field(const json& j, const char* key, Ratio fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (v.is_string()) return Ratio::parse(v.get<std::string>());
  if (v.is_number_integer()) return Ratio(v.get<std::int64_t>());
  return Ratio::from_double(v.get<double>());
}

ModelSpec from_preset(const json& j) {
  const auto preset = j.at("preset").get<std::string>();
  if (preset == "resnet18" || preset == "resnet34")
    return build_resnet(preset == "resnet18" ? 18 : 34, get_or(j, "num_classes", 1000));
  if (preset == "mobilenet")
    return build_mobilenet(ratio_field(j, "width_multiplier", Ratio(1)), get_or(j, "num_classes", 1000));
  if (preset == "sequential") {
    return build_sequential_cnn(j.at("depth").get<int>(), j.at("block_widths").get<std::vector<int>>(),
                                get_or(j, "input_channels", 3), get_or(j, "num_classes", 10));
  }
  reject("unknown preset '" + preset + "'");
}

ModelSpec from_layers(const json& j) {
  ModelSpec spec;
  spec.name = get_or<std::string>(j, "name", "custom");
  spec.metadata.dataset = get_or<std::string>(j, "dataset", spec.metadata.dataset);
  spec.metadata.num_classes = get_or(j, "num_classes", spec.metadata.num_classes);
  spec.metadata.input_resolution = get_or(j, "input_resolution", spec.metadata.input_resolution);
  spec.nominal.channels = j.at("channels").get<std::vector<int>>();
  const auto& ch = spec.nominal.channels;
  auto width = [&](std::size_t slot) {
    if (slot >= ch.size()) reject("slot " + std::to_string(slot) + " beyond the channel vector");
    return ch[slot];
  };

  for (const auto& l : j.at("layers")) {
    const auto type = l.at("type").get<std::string>();
    if (type == "conv") {
      ConvLayer c;
      auto kernel = l.at("kernel");
      if (kernel.is_array()) {
        c.kernel_h = kernel.at(0).get<int>();
        c.kernel_w = kernel.at(1).get<int>();
      } else {
        c.kernel_h = c.kernel_w = kernel.get<int>();
      }
      c.in_slot = l.at("in").get<std::size_t>();
      c.depthwise = get_or(l, "depthwise", false);
      c.out_slot = c.depthwise ? get_or(l, "out", c.in_slot) : l.at("out").get<std::size_t>();
      c.stride = get_or(l, "stride", 1);
      c.has_bias = get_or(l, "bias", false);
      c.shortcut = get_or(l, "shortcut", false);
      c.in_ch = width(c.in_slot);
      c.out_ch = width(c.out_slot);
      spec.layers.emplace_back(c);
    } else if (type == "batchnorm") {
      BatchNormLayer bn;
      bn.slot = l.at("slot").get<std::size_t>();
      bn.shortcut = get_or(l, "shortcut", false);
      bn.channels = width(bn.slot);
      spec.layers.emplace_back(bn);
    } else if (type == "pool") {
      PoolLayer p;
      const auto kind = get_or<std::string>(l, "kind", "max");
      if (kind != "max" && kind != "avg") reject("unknown pool kind '" + kind + "'");
      p.kind = kind == "max" ? PoolKind::max : PoolKind::avg;
      p.window = get_or(l, "window", 2);
      spec.layers.emplace_back(p);
    } else if (type == "global_avg_pool") {
      spec.layers.emplace_back(GlobalAvgPoolLayer{});
    } else if (type == "fc") {
      FullyConnectedLayer fc;
      fc.in_slot = l.at("in").get<std::size_t>();
      fc.in_features = width(fc.in_slot);
      fc.out_features = l.at("out").get<int>();
      fc.has_bias = get_or(l, "bias", true);
      spec.layers.emplace_back(fc);
    } else {
      reject("unknown layer type '" + type + "'");
    }
  }

  auto part = detail::derive_partition_unchecked(spec);
  for (const auto& b : part.blocks) spec.nominal.macroblock_starts.push_back(b.first_channel);
  spec.validate();
  return spec;
}

}  // namespace

ModelSpec model_from_json(const json& j) {
  try {
    if (j.contains("preset")) return from_preset(j);
    return from_layers(j);
  } catch (const json::exception& e) {
    reject(e.what());
  }
}

json model_to_json(const ModelSpec& spec) {
  json layers = json::array();
  for (const auto& layer : spec.layers) {
    if (const auto* c = std::get_if<ConvLayer>(&layer)) {
      json l{{"type", "conv"}, {"kernel", {c->kernel_h, c->kernel_w}}, {"in", c->in_slot}, {"out", c->out_slot}};
      if (c->stride != 1) l["stride"] = c->stride;
      if (c->depthwise) l["depthwise"] = true;
      if (c->has_bias) l["bias"] = true;
      if (c->shortcut) l["shortcut"] = true;
      layers.push_back(std::move(l));
    } else if (const auto* bn = std::get_if<BatchNormLayer>(&layer)) {
      json l{{"type", "batchnorm"}, {"slot", bn->slot}};
      if (bn->shortcut) l["shortcut"] = true;
      layers.push_back(std::move(l));
    } else if (const auto* p = std::get_if<PoolLayer>(&layer)) {
      layers.push_back({{"type", "pool"}, {"kind", p->kind == PoolKind::max ? "max" : "avg"}, {"window", p->window}});
    } else if (std::holds_alternative<GlobalAvgPoolLayer>(layer)) {
      layers.push_back({{"type", "global_avg_pool"}});
    } else if (const auto* fc = std::get_if<FullyConnectedLayer>(&layer)) {
      layers.push_back({{"type", "fc"}, {"in", fc->in_slot}, {"out", fc->out_features}, {"bias", fc->has_bias}});
    }
  }
  return json{{"name", spec.name},
              {"dataset", spec.metadata.dataset},
              {"num_classes", spec.metadata.num_classes},
              {"input_resolution", spec.metadata.input_resolution},
              {"channels", spec.nominal.channels},
              {"layers", std::move(layers)}};
}

ModelSpec load_model_descriptor(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model descriptor " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    reject(path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace brief
