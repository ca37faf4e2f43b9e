#pragma once

#include "brief/arch.hpp"
#include "brief/ratio.hpp"

namespace brief {

/// ImageNet ResNet with basic blocks (depth 18 or 34). Every conv owns its
/// own channel entry; projection shortcuts are recorded as shortcut layers.
/// Macroblocks: stem conv, then one block per residual stage.
ModelSpec build_resnet(int depth, int num_classes = 1000);

/// MobileNet v1 with the given width multiplier. Depthwise convs share the
/// slot of their input, so each macroblock lists only pointwise widths.
ModelSpec build_mobilenet(const Ratio& width_multiplier = Ratio(1), int num_classes = 1000);

}  // namespace brief
