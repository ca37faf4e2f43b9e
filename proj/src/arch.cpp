#include "brief/arch.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "detail/partition.hpp"

namespace brief {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

[[noreturn]] void reject(const std::string& message) { throw std::invalid_argument(message); }

void check_unit_interval(const Ratio& k, const char* what) {
  if (k.is_zero() || k > Ratio(1)) reject(std::string(what) + " must lie in (0, 1], got " + k.str());
}

int checked_width(std::int64_t w) {
  if (w < 1 || w > INT32_MAX) reject("width out of range: " + std::to_string(w));
  return static_cast<int>(w);
}

// Derives block layout from the layer list. When `nominal_known` is false
// the spec's nominal.macroblock_starts are ignored (used while building).
MacroblockPartition compute_partition(const ModelSpec& spec, bool nominal_known) {
  const auto& channels = spec.nominal.channels;
  MacroblockPartition part;
  bool open = false;
  Macroblock current;

  auto close = [&](std::size_t end) {
    if (!open) return;
    current.end_layer = end;
    part.blocks.push_back(current);
    open = false;
  };
  auto start = [&](std::size_t first) {
    current = Macroblock{};
    current.id = part.blocks.size();
    current.first_layer = first;
    open = true;
  };

  for (std::size_t idx = 0; idx < spec.layers.size(); ++idx) {
    std::visit(overloaded{
                   [&](const ConvLayer& c) {
                     if (!c.shortcut && c.stride > 1) close(idx);
                     if (!open) start(idx);
                   },
                   [&](const BatchNormLayer&) {},
                   [&](const PoolLayer&) { close(idx); },
                   [&](const GlobalAvgPoolLayer&) { close(idx); },
                   [&](const FullyConnectedLayer&) { close(idx); },
               },
               spec.layers[idx]);
  }
  close(spec.layers.size());

  if (part.blocks.empty()) reject("model '" + spec.name + "' has no conv layers");

  std::size_t expected_first = 1;
  for (auto& block : part.blocks) {
    std::vector<std::size_t> owned;
    for (std::size_t idx = block.first_layer; idx < block.end_layer; ++idx) {
      if (const auto* c = std::get_if<ConvLayer>(&spec.layers[idx]); c && !c->depthwise) owned.push_back(c->out_slot);
    }
    if (owned.empty()) reject("macroblock " + std::to_string(block.id) + " owns no channel entries");
    std::sort(owned.begin(), owned.end());
    for (std::size_t j = 0; j < owned.size(); ++j) {
      if (owned[j] != expected_first + j)
        reject("channel entries of macroblock " + std::to_string(block.id) + " are not contiguous");
    }
    block.first_channel = expected_first;
    block.end_channel = expected_first + owned.size();
    expected_first = block.end_channel;

    std::vector<int> list;
    for (std::size_t i = block.first_channel; i < block.end_channel; ++i) {
      if (i >= channels.size()) reject("conv slot beyond the channel vector");
      list.push_back(channels[i]);
    }
    part.widths.push_back(*std::max_element(list.begin(), list.end()));
    part.block_channels.push_back(std::move(list));
  }
  if (expected_first != channels.size()) reject("channel vector has entries not produced by any conv layer");

  if (nominal_known) {
    std::vector<std::size_t> starts;
    for (const auto& b : part.blocks) starts.push_back(b.first_channel);
    if (starts != spec.nominal.macroblock_starts)
      reject("macroblock_starts of '" + spec.name + "' disagree with the layer structure");
  }
  return part;
}

}  // namespace

void ChannelConfig::validate() const {
  if (channels.size() < 2) reject("channel vector needs n0 and at least one output channel");
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (channels[i] < 1) reject("channel entry " + std::to_string(i) + " must be >= 1");
  }
  if (macroblock_starts.empty()) reject("at least one macroblock is required");
  if (macroblock_starts.front() != 1) reject("first macroblock must start at index 1");
  for (std::size_t b = 1; b < macroblock_starts.size(); ++b) {
    if (macroblock_starts[b] <= macroblock_starts[b - 1]) reject("macroblock_starts must be strictly increasing");
  }
  if (macroblock_starts.back() >= channels.size()) reject("macroblock start beyond the channel vector");
}

std::pair<std::size_t, std::size_t> ChannelConfig::block_range(std::size_t block) const {
  if (block >= macroblock_starts.size()) reject("macroblock index " + std::to_string(block) + " out of range");
  std::size_t end = block + 1 < macroblock_starts.size() ? macroblock_starts[block + 1] : channels.size();
  return {macroblock_starts[block], end};
}

std::size_t ChannelConfig::block_of(std::size_t index) const {
  if (index == 0 || index >= channels.size()) reject("channel index " + std::to_string(index) + " is not an output channel");
  auto it = std::upper_bound(macroblock_starts.begin(), macroblock_starts.end(), index);
  return static_cast<std::size_t>(it - macroblock_starts.begin()) - 1;
}

std::string to_string(const ChannelConfig& config) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < config.channels.size(); ++i) {
    if (i) out << ", ";
    out << config.channels[i];
  }
  out << ']';
  return out.str();
}

void ModelSpec::validate() const {
  nominal.validate();
  const auto& ch = nominal.channels;
  auto slot_width = [&](std::size_t slot) {
    if (slot >= ch.size()) reject("layer slot " + std::to_string(slot) + " beyond the channel vector");
    return ch[slot];
  };

  std::size_t current_slot = 0;
  int current = ch[0];
  std::size_t shortcut_slot = 0;
  std::size_t heads = 0;
  bool after_head = false;

  for (std::size_t idx = 0; idx < layers.size(); ++idx) {
    const std::string where = "layer " + std::to_string(idx) + ": ";
    std::visit(overloaded{
                   [&](const ConvLayer& c) {
                     if (after_head) reject(where + "conv after the classification head");
                     if (c.kernel_h < 1 || c.kernel_w < 1 || c.stride < 1) reject(where + "bad conv geometry");
                     if (c.in_ch != slot_width(c.in_slot) || c.out_ch != slot_width(c.out_slot))
                       reject(where + "conv widths disagree with the channel vector");
                     if (c.depthwise && (c.in_slot != c.out_slot)) reject(where + "depthwise conv must reuse its input slot");
                     if (c.shortcut) {
                       shortcut_slot = c.out_slot;
                       return;
                     }
                     if (c.in_slot != current_slot || c.in_ch != current)
                       reject(where + "conv input " + std::to_string(c.in_ch) + " does not chain from width " +
                              std::to_string(current));
                     current_slot = c.out_slot;
                     current = c.out_ch;
                   },
                   [&](const BatchNormLayer& bn) {
                     if (bn.channels != slot_width(bn.slot)) reject(where + "batchnorm width disagrees with the channel vector");
                     std::size_t expected = bn.shortcut ? shortcut_slot : current_slot;
                     if (bn.slot != expected) reject(where + "batchnorm does not follow its conv");
                   },
                   [&](const PoolLayer& p) {
                     if (p.window < 1) reject(where + "pool window must be >= 1");
                   },
                   [&](const GlobalAvgPoolLayer&) {},
                   [&](const FullyConnectedLayer& fc) {
                     ++heads;
                     after_head = true;
                     if (fc.in_features != slot_width(fc.in_slot) || fc.in_slot != current_slot || fc.in_features != current)
                       reject(where + "fully connected input does not chain from the last conv");
                     if (fc.out_features < 1) reject(where + "fully connected output must be >= 1");
                   },
               },
               layers[idx]);
  }
  if (heads != 1) reject("model '" + name + "' must have exactly one fully connected head, found " + std::to_string(heads));
  compute_partition(*this, true);
}

ModelSpec ModelSpec::with_channels(const ChannelConfig& config) const {
  config.validate();
  if (config.channels.size() != nominal.channels.size() || config.macroblock_starts != nominal.macroblock_starts)
    reject("channel config layout does not match model '" + name + "'");
  if (config.channels[0] != nominal.channels[0]) reject("input channels n0 are immutable");

  ModelSpec out = *this;
  out.nominal = config;
  const auto& ch = config.channels;
  for (auto& layer : out.layers) {
    std::visit(overloaded{
                   [&](ConvLayer& c) {
                     c.in_ch = ch.at(c.in_slot);
                     c.out_ch = ch.at(c.out_slot);
                   },
                   [&](BatchNormLayer& bn) { bn.channels = ch.at(bn.slot); },
                   [&](PoolLayer&) {},
                   [&](GlobalAvgPoolLayer&) {},
                   [&](FullyConnectedLayer& fc) { fc.in_features = ch.at(fc.in_slot); },
               },
               layer);
  }
  return out;
}

bool MacroblockPartition::uniform(std::size_t block) const {
  const auto& list = block_channels.at(block);
  return std::all_of(list.begin(), list.end(), [&](int w) { return w == list.front(); });
}

ModelSpec build_sequential_cnn(int depth, const std::vector<int>& block_widths, int input_channels,
                               int num_classes) {
  const int blocks = static_cast<int>(block_widths.size());
  if (blocks == 0) reject("at least one block width is required");
  if (depth < blocks) reject("depth " + std::to_string(depth) + " is smaller than the number of blocks");
  if (depth % blocks != 0)
    reject("depth " + std::to_string(depth) + " is not divisible by " + std::to_string(blocks) + " blocks");
  for (int w : block_widths) {
    if (w < 1) reject("block widths must be >= 1");
  }
  if (input_channels < 1) reject("input_channels must be >= 1");
  if (num_classes < 1) reject("num_classes must be >= 1");

  const int per_block = depth / blocks;
  ModelSpec spec;
  spec.name = "sequential-d" + std::to_string(depth);
  spec.metadata.num_classes = num_classes;
  spec.metadata.input_resolution = 32;
  spec.metadata.dataset = num_classes == 10 ? "cifar10" : num_classes == 100 ? "cifar100" : "custom";

  auto& ch = spec.nominal.channels;
  ch.push_back(input_channels);
  for (int b = 0; b < blocks; ++b) {
    spec.nominal.macroblock_starts.push_back(ch.size());
    if (b > 0) spec.layers.emplace_back(PoolLayer{PoolKind::max, 2});
    for (int l = 0; l < per_block; ++l) {
      std::size_t in = ch.size() - 1;
      ch.push_back(block_widths[static_cast<std::size_t>(b)]);
      std::size_t out = ch.size() - 1;
      spec.layers.emplace_back(ConvLayer{3, 3, ch[in], ch[out], 1, false, false, false, in, out});
      spec.layers.emplace_back(BatchNormLayer{ch[out], out, false});
    }
  }
  spec.layers.emplace_back(GlobalAvgPoolLayer{});
  spec.layers.emplace_back(FullyConnectedLayer{ch.back(), num_classes, true, ch.size() - 1});
  spec.validate();
  return spec;
}

MacroblockPartition partition_macroblocks(const ModelSpec& spec) {
  spec.validate();
  return compute_partition(spec, true);
}

ChannelConfig apply_constant_lesion(const ChannelConfig& config, std::size_t index, int value) {
  config.validate();
  if (index == 0) reject("input channels n0 are immutable");
  if (index >= config.channels.size()) reject("channel index " + std::to_string(index) + " out of range");
  if (value < 1) reject("constant lesion value must be >= 1");
  ChannelConfig out = config;
  out.channels[index] = value;
  return out;
}

ChannelConfig apply_proportional_lesion(const ChannelConfig& config, std::size_t index, const Ratio& k) {
  config.validate();
  if (index == 0) reject("input channels n0 are immutable");
  if (index >= config.channels.size()) reject("channel index " + std::to_string(index) + " out of range");
  check_unit_interval(k, "lesion factor k");
  ChannelConfig out = config;
  out.channels[index] = checked_width(k.ceil_mul(config.channels[index]));
  return out;
}

ChannelConfig apply_macroblock_scale(const ChannelConfig& config, const MacroblockPartition& partition,
                                     std::size_t block, const Ratio& k) {
  config.validate();
  if (block >= partition.size() || block >= config.num_blocks())
    reject("macroblock index " + std::to_string(block) + " out of range");
  check_unit_interval(k, "macroblock scale k");
  auto [begin, end] = config.block_range(block);
  if (partition.blocks[block].first_channel != begin || partition.blocks[block].end_channel != end)
    reject("partition does not match the channel config");
  ChannelConfig out = config;
  for (std::size_t i = begin; i < end; ++i) out.channels[i] = checked_width(k.ceil_mul(config.channels[i]));
  return out;
}

ChannelConfig apply_alpha_scaling(const ChannelConfig& config, const Ratio& alpha) {
  config.validate();
  check_unit_interval(alpha, "alpha");
  ChannelConfig out = config;
  for (std::size_t i = 1; i < out.channels.size(); ++i) out.channels[i] = checked_width(alpha.ceil_mul(config.channels[i]));
  return out;
}

ChannelConfig set_block_width(const ChannelConfig& config, const MacroblockPartition& partition,
                              std::size_t block, int width) {
  config.validate();
  if (block >= partition.size() || block >= config.num_blocks())
    reject("macroblock index " + std::to_string(block) + " out of range");
  if (width < 1) reject("block width must be >= 1");
  auto [begin, end] = config.block_range(block);
  ChannelConfig out = config;
  for (std::size_t i = begin; i < end; ++i) out.channels[i] = width;
  return out;
}

std::size_t conv_depth(const ModelSpec& spec) {
  return static_cast<std::size_t>(std::count_if(spec.layers.begin(), spec.layers.end(),
                                                [](const Layer& l) { return std::holds_alternative<ConvLayer>(l); }));
}

namespace detail {
MacroblockPartition derive_partition_unchecked(const ModelSpec& spec) { return compute_partition(spec, false); }
}  // namespace detail

}  // namespace brief
