#pragma once

#include "brief/arch.hpp"

namespace brief::detail {

// Partition derived from layers alone, ignoring nominal.macroblock_starts.
MacroblockPartition derive_partition_unchecked(const ModelSpec& spec);

}  // namespace brief::detail
