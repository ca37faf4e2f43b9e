#include "brief/zoo.hpp"

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "detail/partition.hpp"

namespace brief {
namespace {

class SpecBuilder {
 public:
  explicit SpecBuilder(int input_channels) { spec_.nominal.channels.push_back(input_channels); }

  std::size_t conv(std::size_t in_slot, int width, int kernel, int stride, bool shortcut = false) {
    auto& ch = spec_.nominal.channels;
    ch.push_back(width);
    std::size_t out = ch.size() - 1;
    spec_.layers.emplace_back(ConvLayer{kernel, kernel, ch[in_slot], width, stride, false, false, shortcut, in_slot, out});
    spec_.layers.emplace_back(BatchNormLayer{width, out, shortcut});
    return out;
  }

  void depthwise(std::size_t slot, int stride) {
    int w = spec_.nominal.channels[slot];
    spec_.layers.emplace_back(ConvLayer{3, 3, w, w, stride, true, false, false, slot, slot});
    spec_.layers.emplace_back(BatchNormLayer{w, slot, false});
  }

  void layer(Layer l) { spec_.layers.push_back(std::move(l)); }

  ModelSpec finish(std::string name, std::size_t last_slot, int num_classes) {
    const auto& ch = spec_.nominal.channels;
    spec_.layers.emplace_back(GlobalAvgPoolLayer{});
    spec_.layers.emplace_back(FullyConnectedLayer{ch[last_slot], num_classes, true, last_slot});
    spec_.name = std::move(name);
    spec_.metadata = ModelMetadata{"imagenet", num_classes, 224};
    auto part = detail::derive_partition_unchecked(spec_);
    spec_.nominal.macroblock_starts.clear();
    for (const auto& b : part.blocks) spec_.nominal.macroblock_starts.push_back(b.first_channel);
    spec_.validate();
    return std::move(spec_);
  }

 private:
  ModelSpec spec_;
};

}  // namespace

ModelSpec build_resnet(int depth, int num_classes) {
  std::array<int, 4> repeats{};
  if (depth == 18) {
    repeats = {2, 2, 2, 2};
  } else if (depth == 34) {
    repeats = {3, 4, 6, 3};
  } else {
    throw std::invalid_argument("basic-block ResNet depth must be 18 or 34, got " + std::to_string(depth));
  }
  if (num_classes < 1) throw std::invalid_argument("num_classes must be >= 1");

  constexpr std::array<int, 4> widths{64, 128, 256, 512};
  SpecBuilder b(3);
  std::size_t cur = b.conv(0, 64, 7, 2);
  b.layer(PoolLayer{PoolKind::max, 3});
  for (std::size_t stage = 0; stage < widths.size(); ++stage) {
    for (int j = 0; j < repeats[stage]; ++j) {
      const int stride = (stage > 0 && j == 0) ? 2 : 1;
      const std::size_t block_in = cur;
      const bool project = stride != 1;
      std::size_t mid = b.conv(block_in, widths[stage], 3, stride);
      cur = b.conv(mid, widths[stage], 3, 1);
      if (project) b.conv(block_in, widths[stage], 1, stride, true);
    }
  }
  return b.finish("resnet" + std::to_string(depth), cur, num_classes);
}

ModelSpec build_mobilenet(const Ratio& width_multiplier, int num_classes) {
  if (width_multiplier.is_zero() || width_multiplier > Ratio(1))
    throw std::invalid_argument("MobileNet width multiplier must lie in (0, 1]");
  if (num_classes < 1) throw std::invalid_argument("num_classes must be >= 1");

  struct Stage {
    int width;
    int stride;
  };
  const std::vector<Stage> stages{{64, 1},  {128, 2}, {128, 1}, {256, 2}, {256, 1},  {512, 2},  {512, 1},
                                  {512, 1}, {512, 1}, {512, 1}, {512, 1}, {1024, 2}, {1024, 1}};
  auto scaled = [&](int w) { return static_cast<int>(width_multiplier.ceil_mul(w)); };

  SpecBuilder b(3);
  std::size_t cur = b.conv(0, scaled(32), 3, 2);
  for (const auto& s : stages) {
    b.depthwise(cur, s.stride);
    cur = b.conv(cur, scaled(s.width), 1, 1);
  }
  std::string name = width_multiplier == Ratio(1) ? "mobilenet" : "mobilenet-" + width_multiplier.str();
  return b.finish(name, cur, num_classes);
}

}  // namespace brief
