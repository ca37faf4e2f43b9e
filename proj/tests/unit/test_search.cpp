#include <doctest.h>

#include <cmath>

#include "brief/search.hpp"
#include "enumerator.hpp"

using namespace brief;

namespace {

const ModelSpec& depth15() {
  static const ModelSpec spec = build_sequential_cnn(15, {16, 32, 64}, 3, 10);
  return spec;
}

/// ceil(log2(n / 2)) by doubling.
int expected_calls(int n) {
  int k = 0;
  while ((2LL << k) < n) ++k;
  return k;
}

SurrogateParams wall(double frontier) {
  SurrogateParams p;
  p.weights = {1e6};
  p.frontiers = {frontier};
  return p;
}

int block_width(const ChannelConfig& cfg, const MacroblockPartition& p, std::size_t b) {
  return cfg.channels[p.blocks[b].first_channel];
}

}  // namespace

TEST_CASE("call-count law on the listed widths") {
  for (int n : {2, 16, 32, 64, 128, 512}) {
    const auto spec = build_sequential_cnn(3, {n}, 3, 10);
    const auto p = partition_macroblocks(spec);
    testing::FunctionOracle oracle([&](const ModelSpec& m, const ChannelConfig& c, const TrainingBudget& b) {
      auto r = make_record(m, c, b);
      r.status = EvalStatus::ok;
      r.top1 = 0.9;
      return r;
    });
    const auto s = search_macroblock_multiplier(spec, p, 0, spec.nominal, 0.9, {}, oracle,
                                                TrainingBudget::search_preset());
    CHECK(oracle.calls() == static_cast<std::size_t>(expected_calls(n)));
    CHECK(s.trace.size() == oracle.calls());
  }
  CHECK(expected_calls(2) == 0);
  CHECK(expected_calls(16) == 3);
  CHECK(expected_calls(32) == 4);
  CHECK(expected_calls(64) == 5);
  CHECK(expected_calls(128) == 6);
  CHECK(expected_calls(512) == 8);
}

TEST_CASE("call-count law holds for random widths and outcomes") {
  testing::Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = static_cast<int>(rng.between(2, 2048));
    const auto spec = build_sequential_cnn(3, {n}, 3, 10);
    const auto p = partition_macroblocks(spec);
    testing::Rng coin(rng.next());
    testing::FunctionOracle oracle([&](const ModelSpec& m, const ChannelConfig& c, const TrainingBudget& b) {
      auto r = make_record(m, c, b);
      const auto roll = coin.between(0, 3);
      r.status = roll == 0 ? EvalStatus::failed : EvalStatus::ok;
      r.top1 = roll == 1 ? 0.1 : 0.9;
      return r;
    });
    const auto s = search_macroblock_multiplier(spec, p, 0, spec.nominal, 0.9, {}, oracle,
                                                TrainingBudget::search_preset());
    CHECK(oracle.calls() == static_cast<std::size_t>(expected_calls(n)));
    CHECK(s.beta > Ratio(1, 2));
    CHECK(s.beta <= Ratio(1));
  }
}

TEST_CASE("bisection trace with a hard frontier at 0.55") {
  const auto spec = build_sequential_cnn(3, {64}, 3, 10);
  const auto p = partition_macroblocks(spec);
  SurrogateOracle oracle(p, wall(0.55));
  const auto s = search_macroblock_multiplier(spec, p, 0, spec.nominal, 0.91, {}, oracle,
                                              TrainingBudget::search_preset());
  REQUIRE(s.trace.size() == 5);
  const std::vector<Ratio> probes{Ratio(3, 4), Ratio(5, 8), Ratio(9, 16), Ratio(17, 32), Ratio(35, 64)};
  const std::vector<bool> feasible{true, true, true, false, false};
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(s.trace[i].beta == probes[i]);
    CHECK(s.trace[i].feasible == feasible[i]);
  }
  CHECK(s.beta == Ratio(9, 16));
  CHECK(s.beta.ceil_mul(64) == 36);

  const int brute = testing::exhaustive_min_width(32, 64, [](int w) { return w / 64.0 >= 0.55; });
  CHECK(std::abs(36 - brute) <= 1);

  SearchOptions literal;
  literal.beta_return = BetaReturnMode::last_midpoint;
  const auto m = search_macroblock_multiplier(spec, p, 0, spec.nominal, 0.91, literal, oracle,
                                              TrainingBudget::search_preset());
  CHECK(m.beta == Ratio(35, 64));
}

TEST_CASE("everything feasible descends to n/2 + 1") {
  const auto spec = build_sequential_cnn(3, {64}, 3, 10);
  const auto p = partition_macroblocks(spec);
  SurrogateOracle oracle(p, wall(0.5));
  const auto s = search_macroblock_multiplier(spec, p, 0, spec.nominal, 0.91, {}, oracle,
                                              TrainingBudget::search_preset());
  CHECK(s.beta.ceil_mul(64) == 33);
  for (const auto& probe : s.trace) CHECK(probe.feasible);
}

TEST_CASE("width two never probes") {
  const auto spec = build_sequential_cnn(3, {2}, 3, 10);
  const auto p = partition_macroblocks(spec);
  SurrogateOracle oracle(p, wall(0.5));
  const auto s = search_macroblock_multiplier(spec, p, 0, spec.nominal, 0.91, {}, oracle,
                                              TrainingBudget::search_preset());
  CHECK(s.beta == Ratio(1));
  CHECK(s.trace.empty());
}

TEST_CASE("bisection matches exhaustive scan on random monotone surrogates") {
  testing::Rng rng(2024);
  for (int trial = 0; trial < 250; ++trial) {
    const int n = static_cast<int>(rng.between(2, 256));
    const auto spec = build_sequential_cnn(3, {n}, 3, 10);
    const auto p = partition_macroblocks(spec);
    SurrogateParams params;
    params.a_max = rng.uniform(0.6, 0.95);
    params.exponent = rng.uniform(0.5, 3.0);
    params.weights = {rng.uniform(0.05, 50.0)};
    params.frontiers = {rng.uniform(0.4, 1.0)};
    SearchOptions options;
    options.delta = rng.uniform(0.001, 0.2);
    SurrogateOracle oracle(p, params);

    const auto s = search_macroblock_multiplier(spec, p, 0, spec.nominal, params.a_max, options, oracle,
                                                TrainingBudget::search_preset());
    const int width = static_cast<int>(s.beta.ceil_mul(n));

    auto feasible = [&](int w) {
      const double ratio = static_cast<double>(w) / n;
      const double gap = std::max(0.0, params.frontiers[0] - ratio);
      const double acc = std::clamp(params.a_max - params.weights[0] * std::pow(gap, params.exponent), 0.0, 1.0);
      return params.a_max - acc < options.delta;
    };
    const int lo = (n + 1) / 2;
    const int brute = testing::exhaustive_min_width(lo, n, feasible);
    CHECK(width >= brute);
    CHECK(width <= brute + 1);
    CHECK(feasible(width));
  }
}

TEST_CASE("backward reduction on depth-15 with default surrogate") {
  const auto& spec = depth15();
  const auto p = partition_macroblocks(spec);
  const auto params = SurrogateParams::defaults(3);
  SurrogateOracle oracle(p, params);
  const auto r = brief_backward_reduction(spec, p, {}, oracle, TrainingBudget::search_preset());

  CHECK(r.scope == std::vector<std::size_t>{2, 1, 0});
  CHECK(r.baseline.top1 == 0.91);
  CHECK(r.exhausted_blocks.empty());

  // Greedy brute force: for each block in backward order, scan every width
  // with later blocks fixed at the values already found.
  ChannelConfig working = spec.nominal;
  for (std::size_t b : {2u, 1u, 0u}) {
    const int n = p.widths[b];
    auto feasible = [&](int w) {
      const auto cfg = set_block_width(working, p, b, w);
      return 0.91 - surrogate_accuracy(cfg, p, params) < 0.01;
    };
    const int brute = testing::exhaustive_min_width((n + 1) / 2, n, feasible);
    const int found = block_width(r.reduced_config, p, b);
    CHECK(found >= brute);
    CHECK(found <= brute + 1);
    working = set_block_width(working, p, b, found);
  }
  CHECK(working == r.reduced_config);

  REQUIRE(r.reduced_evaluation.has_value());
  CHECK(distortion(r.baseline.top1, r.reduced_evaluation->top1) < 0.01);
  CHECK(r.reduced_report.size_bytes < r.base_report.size_bytes);
  CHECK(r.saving_percent() == doctest::Approx(saving_percent(r.base_report, r.reduced_report)));
  for (const auto& beta : r.betas) {
    CHECK(beta > Ratio(1, 2));
    CHECK(beta <= Ratio(1));
  }
  ChannelConfig rebuilt = spec.nominal;
  for (std::size_t b = 0; b < 3; ++b) rebuilt = apply_macroblock_scale(rebuilt, p, b, r.betas[b]);
  CHECK(rebuilt == r.reduced_config);
}

TEST_CASE("greedy accumulation is visible in the trace") {
  const auto& spec = depth15();
  const auto p = partition_macroblocks(spec);
  SurrogateOracle oracle(p, SurrogateParams::defaults(3));
  const auto r = brief_backward_reduction(spec, p, {}, oracle, TrainingBudget::search_preset());
  const int b2 = block_width(r.reduced_config, p, 2);
  const int b1 = block_width(r.reduced_config, p, 1);
  for (const auto& probe : r.trace) {
    const auto& ch = probe.evaluation.channels;
    if (probe.block == 1) CHECK(ch[p.blocks[2].first_channel] == b2);
    if (probe.block == 0) {
      CHECK(ch[p.blocks[2].first_channel] == b2);
      CHECK(ch[p.blocks[1].first_channel] == b1);
    }
  }
}

TEST_CASE("scope limits the searched blocks") {
  const auto& spec = depth15();
  const auto p = partition_macroblocks(spec);
  SurrogateOracle oracle(p, SurrogateParams::defaults(3));
  SearchOptions options;
  options.scope = 2;
  const auto r = brief_backward_reduction(spec, p, options, oracle, TrainingBudget::search_preset());
  CHECK(r.scope == std::vector<std::size_t>{2, 1});
  CHECK(r.betas[0] == Ratio(1));
  for (const auto& probe : r.trace) CHECK(probe.block != 0);

  const auto f = forward_reduction(spec, p, options, oracle, TrainingBudget::search_preset());
  CHECK(f.scope == std::vector<std::size_t>{1, 2});
}

TEST_CASE("degenerate budgets") {
  const auto& spec = depth15();
  const auto p = partition_macroblocks(spec);
  SurrogateOracle oracle(p, SurrogateParams::defaults(3));

  SearchOptions everything;
  everything.delta = 1.0;
  const auto all = brief_backward_reduction(spec, p, everything, oracle, TrainingBudget::search_preset());
  CHECK(all.reduced_block_widths() == std::vector<int>{9, 17, 33});

  SearchOptions nothing;
  nothing.delta = 0.0;
  const auto none = brief_backward_reduction(spec, p, nothing, oracle, TrainingBudget::search_preset());
  for (const auto& beta : none.betas) CHECK(beta == Ratio(1));
  CHECK(none.reduced_config == spec.nominal);

  SearchOptions bad;
  bad.delta = 1.5;
  CHECK_THROWS_AS(brief_backward_reduction(spec, p, bad, oracle, TrainingBudget::search_preset()),
                  std::invalid_argument);
  bad.delta = -0.1;
  CHECK_THROWS_AS(brief_backward_reduction(spec, p, bad, oracle, TrainingBudget::search_preset()),
                  std::invalid_argument);
}

TEST_CASE("backward saves more than forward under the default surrogate") {
  const auto& spec = depth15();
  const auto p = partition_macroblocks(spec);
  SurrogateOracle oracle(p, SurrogateParams::defaults(3));
  const auto back = brief_backward_reduction(spec, p, {}, oracle, TrainingBudget::search_preset());
  const auto fwd = forward_reduction(spec, p, {}, oracle, TrainingBudget::search_preset());
  CHECK(fwd.scope == std::vector<std::size_t>{0, 1, 2});
  CHECK(back.saving_percent() > fwd.saving_percent());
  REQUIRE(fwd.reduced_evaluation.has_value());
  CHECK(distortion(fwd.baseline.top1, fwd.reduced_evaluation->top1) < 0.01);
}

TEST_CASE("one-block model: forward equals backward") {
  const auto spec = build_sequential_cnn(4, {40}, 3, 10);
  const auto p = partition_macroblocks(spec);
  SurrogateOracle oracle(p, SurrogateParams::defaults(1));
  SearchOptions options;
  options.scope = 1;
  const auto b = brief_backward_reduction(spec, p, options, oracle, TrainingBudget::search_preset());
  const auto f = forward_reduction(spec, p, options, oracle, TrainingBudget::search_preset());
  CHECK(b.betas == f.betas);
  CHECK(b.reduced_config == f.reduced_config);
}

TEST_CASE("results are deterministic") {
  const auto& spec = depth15();
  const auto p = partition_macroblocks(spec);
  SurrogateOracle oracle(p, SurrogateParams::defaults(3));
  const auto a = to_json(brief_backward_reduction(spec, p, {}, oracle, TrainingBudget::search_preset()));
  const auto b = to_json(brief_backward_reduction(spec, p, {}, oracle, TrainingBudget::search_preset()));
  CHECK(a.dump() == b.dump());
}

TEST_CASE("failed probes are infeasible and an all-failed block stays at 1") {
  const auto& spec = depth15();
  const auto p = partition_macroblocks(spec);
  testing::FunctionOracle oracle([&](const ModelSpec& m, const ChannelConfig& c, const TrainingBudget& b) {
    auto r = make_record(m, c, b);
    const bool nominal_b2 = c.channels[p.blocks[2].first_channel] == 64;
    r.status = c == m.nominal ? EvalStatus::ok : (nominal_b2 ? EvalStatus::ok : EvalStatus::timeout);
    r.top1 = 0.9;
    return r;
  });
  const auto r = brief_backward_reduction(spec, p, {}, oracle, TrainingBudget::search_preset());
  CHECK(r.betas[2] == Ratio(1));
  CHECK(r.exhausted_blocks == std::vector<std::size_t>{2});
  CHECK_FALSE(r.diagnostics.empty());
  CHECK(r.betas[1] < Ratio(1));
  CHECK(r.betas[0] < Ratio(1));
}

TEST_CASE("missing baseline aborts the reduction") {
  const auto& spec = depth15();
  const auto p = partition_macroblocks(spec);
  testing::FunctionOracle oracle([](const ModelSpec& m, const ChannelConfig& c, const TrainingBudget& b) {
    auto r = make_record(m, c, b);
    r.status = EvalStatus::failed;
    return r;
  });
  CHECK_THROWS_AS(brief_backward_reduction(spec, p, {}, oracle, TrainingBudget::search_preset()), BaselineUnavailable);
}

TEST_CASE("report JSON carries betas, configs and trace") {
  const auto& spec = depth15();
  const auto p = partition_macroblocks(spec);
  SurrogateOracle oracle(p, SurrogateParams::defaults(3));
  const auto r = brief_backward_reduction(spec, p, {}, oracle, TrainingBudget::search_preset());
  const auto j = to_json(r);
  CHECK(j["betas"].size() == 3);
  CHECK(j["reduced_channels"].get<std::vector<int>>() == r.reduced_config.channels);
  CHECK(j["trace"].size() == r.trace.size());
  CHECK(j["direction"] == "backward");
  CHECK(j["beta_return_mode"] == "U");
}
