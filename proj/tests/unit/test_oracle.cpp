#include <doctest.h>

#include <cmath>

#include "brief/oracle.hpp"
#include "enumerator.hpp"

using namespace brief;

namespace {

const ModelSpec& depth15() {
  static const ModelSpec spec = build_sequential_cnn(15, {16, 32, 64}, 3, 10);
  return spec;
}

std::vector<std::vector<int>> grouped(const ChannelConfig& cfg, const MacroblockPartition& p) {
  std::vector<std::vector<int>> out;
  for (const auto& b : p.blocks) out.emplace_back(cfg.channels.begin() + b.first_channel, cfg.channels.begin() + b.end_channel);
  return out;
}

}  // namespace

TEST_CASE("training budget presets and validation") {
  const auto s = TrainingBudget::search_preset();
  CHECK(s.epochs == 20);
  CHECK(s.lr_milestones == std::vector<int>{8, 16});
  CHECK(s.lr_divisor == 10.0);
  CHECK(s.momentum == 0.9);
  CHECK(s.weight_decay == 1e-4);
  const auto f = TrainingBudget::final_preset();
  CHECK(f.epochs == 90);
  CHECK(f.lr_milestones == std::vector<int>{30, 60});
  const auto c = TrainingBudget::cifar_preset(200);
  CHECK(c.lr_milestones == std::vector<int>{100, 150});
  CHECK(c.batch_size == 128);

  TrainingBudget bad = s;
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = s;
  bad.lr_milestones = {16, 8};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = s;
  bad.lr_milestones = {8, 20};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK(s.fingerprint() != f.fingerprint());
}

TEST_CASE("distortion") {
  CHECK(distortion(0.9124, 0.9031) == doctest::Approx(0.0093));
  CHECK(distortion(0.9124, 0.9046) == doctest::Approx(0.0078));
  CHECK(distortion(0.5, 0.5) == 0.0);
  CHECK(distortion(0.5, 0.6) < 0.0);
}

TEST_CASE("surrogate boundary cases") {
  const auto p = partition_macroblocks(depth15());
  const auto params = SurrogateParams::defaults(3);
  CHECK(params.a_max == 0.91);
  CHECK(params.frontiers == std::vector<double>{0.95, 0.85, 0.55});

  CHECK(surrogate_accuracy(depth15().nominal, p, params) == 0.91);

  auto at_frontier = params;
  at_frontier.frontiers = {0.95, 0.85, 0.5};
  const auto half = apply_macroblock_scale(depth15().nominal, p, 2, Ratio(1, 2));
  CHECK(surrogate_accuracy(half, p, at_frontier) == 0.91);

  const double expected = 0.91 - 4 * 0.05 * 0.05;
  CHECK(surrogate_accuracy(half, p, params) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(surrogate_accuracy(half, p, params) ==
        doctest::Approx(testing::reference_surrogate(grouped(half, p), p.block_channels, 0.91, 2, {4, 4, 4},
                                                     {0.95, 0.85, 0.55})));

  ChannelConfig wider = depth15().nominal;
  wider.channels[3] = 100;
  CHECK(surrogate_accuracy(wider, p, params) == 0.91);
}

TEST_CASE("surrogate defaults for other block counts") {
  CHECK(SurrogateParams::defaults(1).frontiers == std::vector<double>{0.55});
  const auto five = SurrogateParams::defaults(5).frontiers;
  REQUIRE(five.size() == 5);
  CHECK(five.front() == 0.95);
  CHECK(five.back() == 0.55);
  for (std::size_t i = 1; i < five.size(); ++i) CHECK(five[i] < five[i - 1]);
}

TEST_CASE("surrogate parameter validation") {
  auto p = SurrogateParams::defaults(3);
  CHECK_THROWS_AS(p.validate(2), std::invalid_argument);
  p.a_max = 1.5;
  CHECK_THROWS_AS(p.validate(3), std::invalid_argument);
  p = SurrogateParams::defaults(3);
  p.exponent = 0;
  CHECK_THROWS_AS(p.validate(3), std::invalid_argument);
}

TEST_CASE("surrogate matches the reference formula and is monotone") {
  testing::Rng rng(41);
  const auto& spec = depth15();
  const auto p = partition_macroblocks(spec);
  for (int trial = 0; trial < 500; ++trial) {
    SurrogateParams params;
    params.a_max = rng.uniform(0.5, 1.0);
    params.exponent = rng.uniform(0.5, 3.0);
    for (int b = 0; b < 3; ++b) {
      params.weights.push_back(rng.uniform(0.0, 10.0));
      params.frontiers.push_back(rng.uniform(0.0, 1.0));
    }
    ChannelConfig cfg = spec.nominal;
    for (std::size_t i = 1; i < cfg.channels.size(); ++i) cfg.channels[i] = static_cast<int>(rng.between(1, 80));
    const double a = surrogate_accuracy(cfg, p, params);
    CHECK(a == doctest::Approx(testing::reference_surrogate(grouped(cfg, p), p.block_channels, params.a_max,
                                                            params.exponent, params.weights, params.frontiers))
                   .epsilon(1e-12));
    CHECK(a == surrogate_accuracy(cfg, p, params));

    ChannelConfig up = cfg;
    up.channels[static_cast<std::size_t>(rng.between(1, 15))] += static_cast<int>(rng.between(1, 20));
    CHECK(surrogate_accuracy(up, p, params) >= a);
  }
}

TEST_CASE("surrogate oracle records") {
  const auto& spec = depth15();
  SurrogateOracle oracle(partition_macroblocks(spec), SurrogateParams::defaults(3));
  const auto budget = TrainingBudget::search_preset();
  const auto r = oracle.evaluate(spec, spec.nominal, budget);
  CHECK(r.ok());
  CHECK(r.top1 == 0.91);
  CHECK(r.config_digest == config_digest(spec, spec.nominal));
  CHECK(r.channels == spec.nominal.channels);
  CHECK(r.budget == budget);
  CHECK(oracle.kind() == "surrogate");
}

TEST_CASE("digest stability") {
  const auto& spec = depth15();
  const auto d = config_digest(spec, spec.nominal);
  CHECK(d.size() == 16);
  CHECK(d == config_digest(spec, spec.nominal));

  ModelSpec renamed = spec;
  renamed.name = "something else";
  CHECK(config_digest(renamed, spec.nominal) == d);

  for (std::size_t i = 1; i < spec.nominal.channels.size(); ++i) {
    ChannelConfig changed = spec.nominal;
    changed.channels[i] += 1;
    CHECK(config_digest(spec, changed) != d);
  }
  ModelSpec other_data = spec;
  other_data.metadata.num_classes = 100;
  CHECK(config_digest(other_data, spec.nominal) != d);
}

TEST_CASE("evaluation record JSON round trip and validation") {
  const auto& spec = depth15();
  EvaluationRecord r = make_record(spec, spec.nominal, TrainingBudget::final_preset());
  r.top1 = 0.9124;
  r.top5 = 0.99;
  r.wall_seconds = 12.5;
  r.status = EvalStatus::ok;
  CHECK(record_from_json(to_json(r)) == r);

  r.top5.reset();
  r.status = EvalStatus::timeout;
  r.message = "no reply";
  CHECK(record_from_json(to_json(r)) == r);

  EvaluationRecord bad = r;
  bad.top1 = 1.2;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = r;
  bad.top1 = 0.9;
  bad.top5 = 0.8;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  CHECK(parse_eval_status("timeout") == EvalStatus::timeout);
  CHECK_THROWS_AS(parse_eval_status("bogus"), std::invalid_argument);
}
