#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "brief/arch.hpp"

namespace brief {

// Declarative model descriptors (JSON). Two forms are accepted:
//
//   {"preset": "resnet34"}                     resnet18 | resnet34
//   {"preset": "mobilenet", "width_multiplier": "3/4", "num_classes": 1000}
//   {"preset": "sequential", "depth": 15, "block_widths": [16, 32, 64]}
//
// or an explicit layer list whose widths come from "channels" via slots:
//
//   {"name": "...", "dataset": "cifar10", "num_classes": 10, "input_resolution": 32,
//    "channels": [3, 16, 16],
//    "layers": [{"type": "conv", "kernel": [3, 3], "in": 0, "out": 1},
//               {"type": "batchnorm", "slot": 1}, ...,
//               {"type": "global_avg_pool"},
//               {"type": "fc", "in": 2, "out": 10}]}
//
// Optional conv keys: stride, depthwise, bias, shortcut. Macroblock starts
// are derived from the layer structure.

ModelSpec model_from_json(const nlohmann::json& j);
/// Always emits the explicit form.
nlohmann::json model_to_json(const ModelSpec& spec);

/// Throws std::runtime_error when the file cannot be read and
/// std::invalid_argument when its contents are not a valid model.
ModelSpec load_model_descriptor(const std::filesystem::path& path);

}  // namespace brief
