#include <doctest.h>

#include "brief/arch.hpp"
#include "brief/descriptor.hpp"
#include "brief/zoo.hpp"
#include "enumerator.hpp"

using namespace brief;

namespace {

const std::vector<int> kDepth15 = {3, 16, 16, 16, 16, 16, 32, 32, 32, 32, 32, 64, 64, 64, 64, 64};

ModelSpec depth15() { return build_sequential_cnn(15, {16, 32, 64}, 3, 10); }

std::size_t conv_count(const ModelSpec& spec, const Macroblock& b) {
  std::size_t n = 0;
  for (std::size_t i = b.first_layer; i < b.end_layer; ++i) n += std::holds_alternative<ConvLayer>(spec.layers[i]);
  return n;
}

}  // namespace

TEST_CASE("sequential builder: depth-15 channel vector") {
  const auto spec = depth15();
  CHECK(spec.nominal.channels == kDepth15);
  CHECK(spec.nominal.macroblock_starts == std::vector<std::size_t>{1, 6, 11});
  CHECK(conv_depth(spec) == 15);
  CHECK_NOTHROW(spec.validate());
}

TEST_CASE("sequential builder: minimal and depth-12 instances") {
  CHECK(build_sequential_cnn(3, {8}, 3, 10).nominal.channels == std::vector<int>{3, 8, 8, 8});

  const auto spec = build_sequential_cnn(12, {32, 64, 128}, 3, 100);
  const auto partition = partition_macroblocks(spec);
  for (const auto& b : partition.blocks) CHECK(conv_count(spec, b) == 4);
  const auto& fc = std::get<FullyConnectedLayer>(spec.layers.back());
  CHECK(fc.in_features == 128);
  CHECK(fc.out_features == 100);
}

TEST_CASE("sequential builder rejects bad shapes") {
  CHECK_THROWS_AS(build_sequential_cnn(14, {16, 32, 64}, 3, 10), std::invalid_argument);
  CHECK_THROWS_AS(build_sequential_cnn(2, {16, 32, 64}, 3, 10), std::invalid_argument);
  CHECK_THROWS_AS(build_sequential_cnn(15, {16, 0, 64}, 3, 10), std::invalid_argument);
  CHECK_THROWS_AS(build_sequential_cnn(15, {16, -4, 64}, 3, 10), std::invalid_argument);
}

TEST_CASE("partition of sequential nets") {
  const auto p15 = partition_macroblocks(depth15());
  REQUIRE(p15.size() == 3);
  CHECK(p15.widths == std::vector<int>{16, 32, 64});
  for (const auto& b : p15.blocks) CHECK(b.end_channel - b.first_channel == 5);

  const auto p1 = partition_macroblocks(build_sequential_cnn(3, {8}, 3, 10));
  REQUIRE(p1.size() == 1);
  CHECK(p1.blocks[0].first_channel == 1);
  CHECK(p1.blocks[0].end_channel == 4);

  const auto p18 = partition_macroblocks(build_sequential_cnn(18, {16, 32, 64}, 3, 10));
  REQUIRE(p18.size() == 3);
  CHECK(p18.widths == std::vector<int>{16, 32, 64});
  for (const auto& b : p18.blocks) CHECK(b.end_channel - b.first_channel == 6);
}

TEST_CASE("partition rejects a spec without conv layers") {
  ModelSpec spec;
  spec.name = "empty";
  spec.nominal.channels = {3};
  spec.layers = {GlobalAvgPoolLayer{}, FullyConnectedLayer{3, 10, true, 0}};
  CHECK_THROWS_AS(partition_macroblocks(spec), std::invalid_argument);
}

TEST_CASE("partition round-trips random sequential shapes") {
  testing::Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int blocks = static_cast<int>(rng.between(1, 5));
    std::vector<int> widths;
    for (int b = 0; b < blocks; ++b) widths.push_back(static_cast<int>(rng.between(1, 300)));
    const int depth = blocks * static_cast<int>(rng.between(1, 8));
    const auto spec = build_sequential_cnn(depth, widths, static_cast<int>(rng.between(1, 4)), 10);
    const auto p = partition_macroblocks(spec);
    CHECK(p.widths == widths);
    CHECK(p.blocks.front().first_channel == 1);
    CHECK(p.blocks.back().end_channel == spec.nominal.channels.size());
  }
}

TEST_CASE("constant one-hot lesion rows") {
  const auto n = depth15().nominal;
  const int c = 7;
  CHECK(apply_constant_lesion(n, 1, c).channels ==
        std::vector<int>{3, c, 16, 16, 16, 16, 32, 32, 32, 32, 32, 64, 64, 64, 64, 64});
  CHECK(apply_constant_lesion(n, 14, c).channels ==
        std::vector<int>{3, 16, 16, 16, 16, 16, 32, 32, 32, 32, 32, 64, 64, 64, c, 64});
  CHECK(apply_constant_lesion(n, 3, n.channels[3]) == n);
  CHECK_THROWS_AS(apply_constant_lesion(n, 0, 4), std::invalid_argument);
  CHECK_THROWS_AS(apply_constant_lesion(n, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(apply_constant_lesion(n, 16, 4), std::invalid_argument);
}

TEST_CASE("proportional one-hot lesion") {
  const auto n = depth15().nominal;
  CHECK(apply_proportional_lesion(n, 12, Ratio(1, 16)).channels[12] == 4);
  CHECK(apply_proportional_lesion(n, 6, Ratio(1, 8)).channels[6] == 4);
  CHECK(apply_proportional_lesion(n, 2, Ratio(1)) == n);
  CHECK_THROWS_AS(apply_proportional_lesion(n, 2, Ratio(0)), std::invalid_argument);
  CHECK_THROWS_AS(apply_proportional_lesion(n, 2, Ratio(5, 4)), std::invalid_argument);
}

TEST_CASE("macroblock scaling") {
  const auto spec = depth15();
  const auto p = partition_macroblocks(spec);
  const auto& n = spec.nominal;

  auto b2 = apply_macroblock_scale(n, p, 2, Ratio(15, 16));
  for (std::size_t i = 11; i <= 15; ++i) CHECK(b2.channels[i] == 60);
  for (std::size_t i = 0; i < 11; ++i) CHECK(b2.channels[i] == n.channels[i]);

  auto b1 = apply_macroblock_scale(n, p, 1, Ratio(11, 16));
  for (std::size_t i = 6; i <= 10; ++i) CHECK(b1.channels[i] == 22);

  CHECK(apply_macroblock_scale(n, p, 0, Ratio(1)) == n);
  CHECK_THROWS_AS(apply_macroblock_scale(n, p, 3, Ratio(1, 2)), std::invalid_argument);
}

TEST_CASE("alpha scaling") {
  const auto d12 = build_sequential_cnn(12, {32, 64, 128}, 3, 10);
  const auto half = apply_alpha_scaling(d12.nominal, Ratio(1, 2));
  CHECK(partition_macroblocks(d12.with_channels(half)).widths == std::vector<int>{16, 32, 64});
  CHECK(half.channels[0] == 3);

  const auto n = depth15().nominal;
  CHECK(apply_alpha_scaling(n, Ratio(1)) == n);
  const auto a7 = apply_alpha_scaling(n, Ratio::parse("0.7"));
  CHECK(a7.channels[1] == 12);
  CHECK(a7.channels[6] == 23);
  CHECK(a7.channels[11] == 45);
  CHECK_THROWS_AS(apply_alpha_scaling(n, Ratio(0)), std::invalid_argument);
  CHECK_THROWS_AS(apply_alpha_scaling(n, Ratio(3, 2)), std::invalid_argument);
}

TEST_CASE("transform properties over random inputs") {
  testing::Rng rng(23);
  const auto spec = build_sequential_cnn(15, {16, 32, 64}, 3, 10);
  const auto p = partition_macroblocks(spec);
  for (int trial = 0; trial < 300; ++trial) {
    ChannelConfig cfg = spec.nominal;
    for (std::size_t i = 1; i < cfg.channels.size(); ++i) cfg.channels[i] = static_cast<int>(rng.between(1, 200));
    const auto den = rng.between(1, 64);
    const Ratio k(rng.between(1, den), den);
    const auto i = static_cast<std::size_t>(rng.between(1, 15));

    const auto prop = apply_proportional_lesion(cfg, i, k);
    const auto cons = apply_constant_lesion(cfg, i, static_cast<int>(rng.between(1, 99)));
    for (std::size_t j = 0; j < cfg.channels.size(); ++j) {
      if (j == i) continue;
      CHECK(prop.channels[j] == cfg.channels[j]);
      CHECK(cons.channels[j] == cfg.channels[j]);
    }
    CHECK(prop.channels[i] >= 1);
    CHECK(prop.channels[i] <= cfg.channels[i]);
    CHECK(prop.channels[i] >= k.floor_mul(cfg.channels[i]));

    const auto b = static_cast<std::size_t>(rng.between(0, 2));
    const auto scaled = apply_macroblock_scale(cfg, p, b, k);
    for (std::size_t j = 0; j < cfg.channels.size(); ++j) {
      const bool inside = j >= p.blocks[b].first_channel && j < p.blocks[b].end_channel;
      if (!inside) {
        CHECK(scaled.channels[j] == cfg.channels[j]);
      } else {
        CHECK(scaled.channels[j] >= 1);
        CHECK(scaled.channels[j] <= cfg.channels[j]);
        CHECK(scaled.channels[j] >= k.floor_mul(cfg.channels[j]));
      }
    }
    const auto alpha = apply_alpha_scaling(cfg, k);
    CHECK(alpha.channels[0] == cfg.channels[0]);
  }
}

TEST_CASE("config invariants are enforced") {
  ChannelConfig bad{{3, 0, 4}, {1}};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  ChannelConfig unordered{{3, 4, 4, 4}, {2, 1}};
  CHECK_THROWS_AS(unordered.validate(), std::invalid_argument);
  ChannelConfig late{{3, 4, 4, 4}, {2}};
  CHECK_THROWS_AS(late.validate(), std::invalid_argument);
  ChannelConfig ok{{3, 4, 4, 4}, {1, 3}};
  CHECK_NOTHROW(ok.validate());
  CHECK(ok.block_of(2) == 0);
  CHECK(ok.block_of(3) == 1);
}

TEST_CASE("with_channels re-materializes layer widths") {
  const auto spec = depth15();
  const auto p = partition_macroblocks(spec);
  const auto cfg = apply_macroblock_scale(spec.nominal, p, 2, Ratio(1, 2));
  const auto reduced = spec.with_channels(cfg);
  CHECK(std::get<FullyConnectedLayer>(reduced.layers.back()).in_features == 32);
  CHECK_NOTHROW(reduced.validate());
}

TEST_CASE("residual and depthwise zoo models partition as expected") {
  const auto r34 = build_resnet(34);
  const auto pr = partition_macroblocks(r34);
  REQUIRE(pr.size() == 5);
  CHECK(pr.widths == std::vector<int>{64, 64, 128, 256, 512});

  const auto mb = build_mobilenet();
  const auto pm = partition_macroblocks(mb);
  REQUIRE(pm.size() == 5);
  CHECK(pm.widths.back() == 1024);
  CHECK(pm.block_channels[3] == std::vector<int>(6, 512));
  CHECK(pm.block_channels[4] == std::vector<int>(2, 1024));
  CHECK_THROWS_AS(build_resnet(50), std::invalid_argument);
}

TEST_CASE("descriptor JSON round trip") {
  for (const auto& spec : {depth15(), build_resnet(18), build_mobilenet(Ratio(3, 4))}) {
    const auto back = model_from_json(model_to_json(spec));
    CHECK(back == spec);
  }
  const auto preset = model_from_json(nlohmann::json::parse(R"({"preset": "resnet34"})"));
  CHECK(preset == build_resnet(34));
  CHECK_THROWS_AS(model_from_json(nlohmann::json::parse(R"({"preset": "vgg"})")), std::invalid_argument);
  CHECK_THROWS_AS(load_model_descriptor("/nonexistent/model.json"), std::runtime_error);
}
