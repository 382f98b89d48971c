import json

import pytest

from ..config import PipelineConfig
from ..exceptions import ConfigError
from ..experiments import (BETA_GRID, DELTA_SWEEP, EXPERIMENTS, LAMBDA_GRID,
                           run_experiment)
from ..synthgen import ScenarioConfig
from ._scenarios import tiny_config

THREE_APPS = ("alpha", "bravo", "charlie")


def _config(apps=THREE_APPS, **changes):
    scenario = ScenarioConfig(apps=apps, **changes.pop("scenario", {}))
    return PipelineConfig(scenario=scenario, **changes)


def _unimodal(values):
    peak = values.index(max(values))
    rising = all(a <= b for a, b in zip(values[:peak], values[1:peak + 1]))
    falling = all(a >= b for a, b in zip(values[peak:], values[peak + 1:]))
    return rising and falling


def test_registry():
    assert sorted(EXPERIMENTS) == sorted([
        "delta-sweep", "map-vs-bag", "lambda-beta-grid", "unseen-platform",
        "unseen-version", "unseen-app", "interleaved", "shared-private-dtw"])
    assert LAMBDA_GRID[0] == 0.2 and LAMBDA_GRID[-1] == 2.0
    assert BETA_GRID == (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


def test_unknown_experiment():
    with pytest.raises(ConfigError, match="unknown experiment"):
        run_experiment("bogus", tiny_config())


def test_delta_sweep(tmp_path):
    result = run_experiment("delta-sweep", tiny_config(), tmp_path)
    assert len(result.table) == len(DELTA_SWEEP) * 2
    assert result.table["f1"].between(0.0, 1.0).all()
    assert result.summary["best_delta_t"] in DELTA_SWEEP
    assert (tmp_path / "delta-sweep.csv").exists()
    assert json.loads((tmp_path / "summary.json").read_text()) == \
        result.summary
    assert not (tmp_path / "report.json").exists()


def test_shared_private_dtw():
    result = run_experiment("shared-private-dtw", tiny_config())
    assert set(result.table["app"]) == {"alpha", "bravo"}
    assert result.summary["shared_similarity"] > \
        result.summary["private_similarity"]


@pytest.mark.slow
def test_interleaved(tmp_path):
    result = run_experiment("interleaved", tiny_config(), tmp_path)
    assert 0.0 <= result.summary["attribution_accuracy"] <= 1.0
    assert "label" in result.table.columns
    assert (tmp_path / "report.json").exists()


@pytest.mark.slow
def test_unseen_app():
    result = run_experiment("unseen-app", tiny_config())
    assert result.summary["held_out_app"] == "bravo"
    assert 0.0 <= result.summary["rejection_rate"] <= 1.0


def test_unimodal():
    assert _unimodal([0.2, 0.5, 0.9, 0.9, 0.4])
    assert _unimodal([1.0, 1.0, 0.8])
    assert not _unimodal([0.5, 0.2, 0.6])


def test_lambda_beta_grid_needs_two_apps():
    with pytest.raises(ConfigError, match="two apps"):
        run_experiment("lambda-beta-grid",
                       tiny_config(scenario=ScenarioConfig(apps=("alpha",),
                                                           rng_seed=1)))


@pytest.mark.slow
def test_delta_sweep_peaks_at_half_a_second():
    result = run_experiment("delta-sweep", _config())
    f1 = {float(k): v for k, v in result.summary["mean_f1"].items()}
    assert f1[0.5] >= 0.90
    assert all(f1[0.5] > f1[d] for d in (0.05, 2.0, 5.0))
    assert result.summary["best_delta_t"] == 0.5


@pytest.mark.slow
def test_map_matching_halves_bag_errors():
    result = run_experiment("map-vs-bag", _config())
    map_, bag = result.summary["map"], result.summary["bag"]
    assert map_["fnr"] <= 0.5 * bag["fnr"]
    assert map_["fpr"] <= 0.5 * bag["fpr"]


@pytest.mark.slow
def test_lambda_beta_grid_splits_apps():
    apps = ("alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf",
            "hotel")
    config = _config(apps, n_trees=30,
                     scenario={"instances_per_behavior": 20,
                               "train_instances": 15})
    result = run_experiment("lambda-beta-grid", config)
    assert result.summary["known_apps"] == list(apps[:4])
    assert result.summary["held_out_apps"] == list(apps[4:])
    table = result.table
    assert len(table) == len(LAMBDA_GRID) * len(BETA_GRID)
    curve = table[table["lambda"] == 1.0].sort_values("beta")["unseen_f1"]
    curve = curve.tolist()
    assert _unimodal(curve)
    assert curve[BETA_GRID.index(0.3)] >= 0.85 * max(curve)


@pytest.mark.slow
def test_refinement_gain_on_unseen_platforms():
    result = run_experiment("unseen-platform", _config(n_trees=50))
    summary = result.summary
    assert summary["refined_f1"] - summary["unrefined_f1"] >= 0.10
    assert summary["unrefined_f1"] > summary["chance_f1"]


@pytest.mark.slow
def test_ten_app_interleaved_traces():
    config = PipelineConfig(n_trees=50)
    assert len(config.scenario.apps) == 10
    result = run_experiment("interleaved", config)
    assert result.summary["f1"] >= 0.90
    assert result.summary["attribution_accuracy"] >= 0.9
