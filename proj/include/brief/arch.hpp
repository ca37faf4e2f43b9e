#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "brief/ratio.hpp"

namespace brief {

/// Channel vector n = [n0, n1, ..., nN] with macroblock grouping.
///
/// n0 is the number of input image channels and is never an output channel;
/// every transform leaves it untouched. macroblock_starts[b] is the index of
/// the first entry owned by macroblock b, so block b owns the half-open range
/// [starts[b], starts[b+1]) and the last block runs to the end of the vector.
struct ChannelConfig {
  std::vector<int> channels;
  std::vector<std::size_t> macroblock_starts;

  /// Throws std::invalid_argument when an invariant is broken.
  void validate() const;

  std::size_t num_blocks() const { return macroblock_starts.size(); }
  /// Half-open [begin, end) channel-index range of block b.
  std::pair<std::size_t, std::size_t> block_range(std::size_t block) const;
  /// Block owning channel index i (i >= 1).
  std::size_t block_of(std::size_t index) const;

  friend bool operator==(const ChannelConfig&, const ChannelConfig&) = default;
};

std::string to_string(const ChannelConfig& config);

enum class PoolKind { max, avg };

// Channel-bearing layers carry "slots": indices into the channel vector
// that determine their widths. A depthwise conv reuses its input slot as
// its output slot, so it owns no entry of its own.

struct ConvLayer {
  int kernel_h = 3;
  int kernel_w = 3;
  int in_ch = 0;
  int out_ch = 0;
  int stride = 1;
  bool depthwise = false;
  bool has_bias = false;
  /// Layer sits on a residual projection branch rather than the main path.
  bool shortcut = false;
  std::size_t in_slot = 0;
  std::size_t out_slot = 0;

  friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

struct BatchNormLayer {
  int channels = 0;
  std::size_t slot = 0;
  bool shortcut = false;

  friend bool operator==(const BatchNormLayer&, const BatchNormLayer&) = default;
};

struct PoolLayer {
  PoolKind kind = PoolKind::max;
  int window = 2;

  friend bool operator==(const PoolLayer&, const PoolLayer&) = default;
};

struct GlobalAvgPoolLayer {
  friend bool operator==(const GlobalAvgPoolLayer&, const GlobalAvgPoolLayer&) = default;
};

struct FullyConnectedLayer {
  int in_features = 0;
  int out_features = 0;
  bool has_bias = true;
  std::size_t in_slot = 0;

  friend bool operator==(const FullyConnectedLayer&, const FullyConnectedLayer&) = default;
};

using Layer = std::variant<ConvLayer, BatchNormLayer, PoolLayer, GlobalAvgPoolLayer, FullyConnectedLayer>;

struct ModelMetadata {
  std::string dataset = "cifar10";
  int num_classes = 10;
  int input_resolution = 32;

  friend bool operator==(const ModelMetadata&, const ModelMetadata&) = default;
};

/// Layer-by-layer architecture, complete enough for exact parameter counts.
struct ModelSpec {
  std::string name;
  std::vector<Layer> layers;
  /// Nominal channel vector the layer widths were materialized from.
  ChannelConfig nominal;
  ModelMetadata metadata;

  /// Checks slot bindings, chain consistency along the main path and the
  /// single classification head. Throws std::invalid_argument.
  void validate() const;

  /// Copy whose layer widths are re-materialized from `config`. The config
  /// must have the same length and block layout as the nominal one.
  ModelSpec with_channels(const ChannelConfig& config) const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct Macroblock {
  std::size_t id = 0;
  /// Half-open range of layer indices.
  std::size_t first_layer = 0;
  std::size_t end_layer = 0;
  /// Half-open range of channel-vector entries owned by the block.
  std::size_t first_channel = 0;
  std::size_t end_channel = 0;

  friend bool operator==(const Macroblock&, const Macroblock&) = default;
};

struct MacroblockPartition {
  std::vector<Macroblock> blocks;
  /// n_b: shared width of each block. For non-uniform blocks this holds the
  /// widest entry and `block_channels` keeps the per-layer list.
  std::vector<int> widths;
  std::vector<std::vector<int>> block_channels;

  std::size_t size() const { return blocks.size(); }
  bool uniform(std::size_t block) const;

  friend bool operator==(const MacroblockPartition&, const MacroblockPartition&) = default;
};

/// depth 3x3 conv+BN layers split evenly over the blocks, a 2x2 max pool
/// between consecutive blocks, then global average pooling and one FC head.
ModelSpec build_sequential_cnn(int depth, const std::vector<int>& block_widths, int input_channels,
                               int num_classes);

/// Consecutive conv layers between down-sampling operations (pooling or a
/// strided main-path conv) form one block.
MacroblockPartition partition_macroblocks(const ModelSpec& spec);

/// h_i(n, c): channels[i] = c.
ChannelConfig apply_constant_lesion(const ChannelConfig& config, std::size_t index, int value);

/// h_i(n, k * n_i) with ceiling rounding.
ChannelConfig apply_proportional_lesion(const ChannelConfig& config, std::size_t index, const Ratio& k);

/// Every entry of block `block` becomes ceil(k * entry).
ChannelConfig apply_macroblock_scale(const ChannelConfig& config, const MacroblockPartition& partition,
                                     std::size_t block, const Ratio& k);

/// Every output-channel entry (indices 1..N) becomes ceil(alpha * entry).
ChannelConfig apply_alpha_scaling(const ChannelConfig& config, const Ratio& alpha);

/// Sets every entry of `block` to `width`. Used to express reported
/// configurations such as "[256, 346]" for the trailing blocks.
ChannelConfig set_block_width(const ChannelConfig& config, const MacroblockPartition& partition,
                              std::size_t block, int width);

/// Number of conv layers in the model.
std::size_t conv_depth(const ModelSpec& spec);

}  // namespace brief
