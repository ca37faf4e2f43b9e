import json
import os
import pathlib
import sys

import pytest

import brief

FIXTURES = pathlib.Path(os.environ.get("BRIEF_TEST_FIXTURES", pathlib.Path(__file__).parents[1] / "fixtures"))


@pytest.fixture
def depth15():
    return brief.build_sequential_cnn(15, [16, 32, 64])


def surrogate(spec):
    partition = brief.partition_macroblocks(spec)
    return partition, brief.SurrogateOracle(partition, brief.SurrogateParams.defaults(len(partition)))


def test_ratio_is_exact():
    assert brief.Ratio("0.7").ceil_mul(10) == 7
    assert brief.Ratio(0.7) == brief.Ratio(7, 10)
    assert str(brief.Ratio("22/32")) == "11/16"
    assert brief.Ratio(1, 2) < brief.Ratio(9, 16)
    with pytest.raises(ValueError):
        brief.Ratio("abc")


def test_depth15_accounting(depth15):
    report = brief.count_parameters(depth15)
    assert report.stored_scalars == 219898
    assert report.size_bytes == 879592
    assert depth15.nominal.channels == [3] + [16] * 5 + [32] * 5 + [64] * 5
    assert depth15.nominal.macroblock_starts == [1, 6, 11]
    assert brief.count_parameters(depth15, bytes_per_scalar=2, overhead=10).size_bytes == 219898 * 2 + 10


def test_zoo_reduced_sizes():
    spec = brief.model_from_json({"preset": "resnet34"})
    partition = brief.partition_macroblocks(spec)
    config = brief.set_block_width(spec.nominal, partition, 3, 256)
    config = brief.set_block_width(config, partition, 4, 346)
    base = brief.count_parameters(spec)
    reduced = brief.count_parameters(spec, config)
    assert base.parameter_count == 21797672
    assert reduced.parameter_count == 14795128
    assert abs(brief.saving_percent(base, reduced) - 32.1) <= 1.0


def test_transforms(depth15):
    nominal = depth15.nominal
    assert brief.apply_constant_lesion(nominal, 1, 1).channels[1] == 1
    assert brief.apply_proportional_lesion(nominal, 14, "1/8").channels[14] == 8
    assert brief.apply_alpha_scaling(nominal, "7/10").channels[1:3] == [12, 12]
    partition = brief.partition_macroblocks(depth15)
    assert brief.apply_macroblock_scale(nominal, partition, 2, "9/16").channels[11:] == [36] * 5


def test_backward_reduction_with_surrogate(depth15):
    partition, oracle = surrogate(depth15)
    result = brief.brief_backward_reduction(depth15, partition, brief.SearchOptions(delta=0.01), oracle,
                                            brief.TrainingBudget.search_preset())
    assert [str(b) for b in result.betas] == ["15/16", "27/32", "33/64"]
    assert result.reduced_block_widths == [15, 27, 33]
    assert result.to_json()["reduced_block_widths"] == [15, 27, 33]
    forward = brief.forward_reduction(depth15, partition, brief.SearchOptions(), oracle,
                                      brief.TrainingBudget.search_preset())
    assert result.saving_percent > forward.saving_percent


def test_python_callable_oracle(depth15):
    calls = []

    def evaluate(model, config, budget):
        calls.append(config.channels)
        return 0.9 if config.channels[11] >= 40 else 0.5

    oracle = brief.CallableOracle(evaluate, parallelism=2)
    partition = brief.partition_macroblocks(depth15)
    options = brief.SearchOptions(delta=0.01, scope=1)
    result = brief.brief_backward_reduction(depth15, partition, options, oracle, brief.TrainingBudget.search_preset())
    assert result.reduced_block_widths == [16, 32, 40]
    assert len(calls) == 1 + 5
    assert len(result.trace) == 5


def test_failed_python_evaluations(depth15):
    oracle = brief.CallableOracle(lambda m, c, b: None)
    partition = brief.partition_macroblocks(depth15)
    with pytest.raises(brief.BaselineUnavailable):
        brief.brief_backward_reduction(depth15, partition, brief.SearchOptions(), oracle,
                                       brief.TrainingBudget.search_preset())


def test_ledger_replay(depth15, tmp_path):
    partition, inner = surrogate(depth15)
    ledger = brief.Ledger(tmp_path / "ledger.jsonl")
    recording = brief.RecordingOracle(inner, ledger)
    budget = brief.TrainingBudget.search_preset()
    first = brief.brief_backward_reduction(depth15, partition, brief.SearchOptions(), recording, budget)
    assert recording.forwarded == len(ledger) > 0

    replay = brief.ReplayOracle(brief.Ledger(tmp_path / "ledger.jsonl", writable=False))
    again = brief.brief_backward_reduction(depth15, partition, brief.SearchOptions(), replay, budget)
    assert again.to_json() == first.to_json()
    with pytest.raises(brief.MissingEvaluation):
        brief.brief_backward_reduction(depth15, partition, brief.SearchOptions(delta=0.2), replay, budget)


def test_lesion_and_rd(depth15, tmp_path):
    _, oracle = surrogate(depth15)
    plan = brief.SweepPlan(brief.LesionKind.constant, [1], brief.default_lesion_indices(depth15))
    points = brief.run_onehot_sweep(depth15, plan, oracle)
    assert [p.index for p in points] == list(range(1, 15))
    assert points[0].config.channels[1] == 1

    alphas = ["0.5", "0.6", "0.7", "0.8", "0.9"]
    budget = brief.TrainingBudget.search_preset()
    curve = brief.build_alpha_curve(depth15, alphas, oracle, budget)
    composed = brief.build_alpha_plus_brief_curve(depth15, alphas, brief.SearchOptions(), oracle, budget)
    sizes = [p.size_bytes for p in curve]
    assert sizes == sorted(sizes) and len(set(sizes)) == 5
    assert all(c.size_bytes <= a.size_bytes for a, c in zip(curve, composed))
    brief.export_curve(curve, tmp_path / "curve.csv")
    assert brief.import_curve(tmp_path / "curve.csv") == curve


@pytest.mark.skipif(not sys.executable, reason="needs a python interpreter for the fake trainer")
def test_external_trainer(depth15):
    oracle = brief.ExternalTrainerOracle([sys.executable, str(FIXTURES / "fake_trainer.py"), "ok"], timeout_seconds=10)
    record = oracle.evaluate(depth15, depth15.nominal, brief.TrainingBudget.search_preset())
    assert record.ok
    assert record.top1 == pytest.approx(min(0.9, 0.3 + 0.002 * sum(depth15.nominal.channels)))


def test_cli_round_trip(tmp_path):
    config = tmp_path / "run.ini"
    config.write_text("[model]\nfamily = sequential\ndepth = 15\nblock_widths = 16,32,64\n")
    run = brief.run_cli(["reduce", "--config", str(config), "--out", str(tmp_path / "run")])
    assert run["exit_code"] == 0, run["stderr"]
    assert run["fresh_evaluations"] > 0
    report = json.loads((tmp_path / "run" / "report.json").read_text())
    assert report["reduced_block_widths"] == [15, 27, 33]

    replay = brief.run_cli(["replay", "--config", str(tmp_path / "run" / "config.ini")])
    assert replay["exit_code"] == 0
    assert replay["fresh_evaluations"] == 0
    assert replay["stdout"] == run["stdout"]
    assert brief.run_cli(["reduce", "--config", str(tmp_path / "missing.ini")])["exit_code"] == 2
