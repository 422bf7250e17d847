"""Tests for training runs, early stopping, seed sweeps and metric files."""

import json
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest

from dpgcnn.autodiff.rng import Rng
from dpgcnn.datasets.base import VertexDataset
from dpgcnn.datasets.link import make_link_task
from dpgcnn.datasets.splits import SplitSpec, make_split
from dpgcnn.datasets.synthetic import planted_direction
from dpgcnn.errors import DivergedLoss, PreconditionError, SweepRunError
from dpgcnn.layers.models import (
    GraphContext,
    Model,
    build_link_model,
    build_vertex_model,
    count_params,
)
from dpgcnn.training import sweep
from dpgcnn.training.metrics import RunMetrics, SweepSummary, write_metrics
from dpgcnn.training.sweep import ExperimentRunner, run_experiment, run_sweep, with_epochs
from dpgcnn.training.trainer import EarlyStopping, evaluate, fit_vertex, predict, train_link
from dpgcnn.utils.config import TrainConfig, load_experiment

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _smoke(name: str, data_dir=None):
    return load_experiment(CONFIGS / f"{name}.json", data_dir)


def _fake_run(seed: int) -> RunMetrics:
    return RunMetrics(seed=seed, test_acc=0.5 + 0.01 * seed, params=10)


# ---------------------------------------------------------------------------
# Early stopping
# ---------------------------------------------------------------------------


def test_early_stopping_tracks_best_epoch() -> None:
    stopper = EarlyStopping(patience=2)
    assert stopper.update(1, 1.0, 0.5) == (True, False)
    assert stopper.update(2, 0.8, 0.5) == (True, False)
    assert stopper.update(3, 0.9, 0.4) == (False, False)
    assert stopper.update(4, 0.9, 0.4) == (False, True)
    assert stopper.best_epoch == 2


def test_early_stopping_resets_on_new_best_accuracy() -> None:
    """Accuracy records reset patience without moving the best epoch."""
    stopper = EarlyStopping(patience=2)
    stopper.update(1, 0.5, 0.5)
    stopper.update(2, 0.6, 0.5)
    improved, stop = stopper.update(3, 0.7, 0.6)
    assert not improved and not stop
    assert stopper.bad_epochs == 0
    assert stopper.best_epoch == 1


def test_early_stopping_tie_breaks() -> None:
    """Equal loss prefers higher accuracy; full ties keep the earlier epoch."""
    stopper = EarlyStopping(patience=5)
    stopper.update(1, 0.5, 0.5)
    stopper.update(2, 0.5, 0.7)
    stopper.update(3, 0.5, 0.7)
    assert stopper.best_epoch == 2


# ---------------------------------------------------------------------------
# Single runs
# ---------------------------------------------------------------------------


def _cluster_run(cluster_data, max_epochs: int = 200, seed: int = 0, **overrides):
    spec = build_vertex_model(8, 2, heads=2, hidden=4, dual_out=4)
    split = make_split(
        cluster_data.content(), SplitSpec(train_size=10, val_size=10, test_size=20, seed=seed)
    )
    cfg = TrainConfig(
        lr=0.01,
        dropout_keep=0.8,
        max_epochs=max_epochs,
        patience=min(50, max_epochs),
        seeds=[seed],
        **overrides,
    )
    return fit_vertex(spec, cluster_data, split, cfg, seed)


def test_two_cluster_is_learned(cluster_data) -> None:
    run = _cluster_run(cluster_data)
    assert run.metrics.test_acc >= 0.95
    assert 1 <= run.metrics.best_epoch <= run.metrics.epochs <= 200
    assert len(run.metrics.val_loss_curve) == run.metrics.epochs


def test_restored_model_reproduces_metrics(cluster_data) -> None:
    run = _cluster_run(cluster_data, max_epochs=60)
    _, test_acc = evaluate(run.model, run.context, run.masks.labels, run.masks.test)
    assert test_acc == run.metrics.test_acc
    predicted = predict(run.model, run.context)
    assert predicted.shape == (cluster_data.graph.n,)


def test_zero_epochs_scores_initial_weights(cluster_data) -> None:
    run = _cluster_run(cluster_data, max_epochs=0)
    assert run.metrics.epochs == 0
    assert run.metrics.best_epoch == 0
    assert run.metrics.train_loss_curve == []

    spec = build_vertex_model(8, 2, heads=2, hidden=4, dual_out=4)
    fresh = Model.init(spec, Rng(0), 8)
    ctx = GraphContext.prepare(cluster_data.features, cluster_data.graph, spec)
    _, acc = evaluate(fresh, ctx, cluster_data.labels, run.masks.test)
    assert acc == run.metrics.test_acc


def test_runs_are_deterministic(cluster_data) -> None:
    a = _cluster_run(cluster_data, max_epochs=30, seed=3).metrics
    b = _cluster_run(cluster_data, max_epochs=30, seed=3).metrics
    assert a.to_dict(timestamps=False) == b.to_dict(timestamps=False)


def test_spec_dropout_overrides_train_config(cluster_data) -> None:
    spec = build_vertex_model(8, 2, heads=2, hidden=4, dual_out=4)
    split = make_split(
        cluster_data.content(), SplitSpec(train_size=10, val_size=10, test_size=20, seed=0)
    )
    no_dropout = TrainConfig(dropout_keep=1.0, max_epochs=15, patience=15)
    plain = fit_vertex(spec, cluster_data, split, no_dropout, 0)
    spec.dropout_keep = 1.0
    heavy_dropout = TrainConfig(dropout_keep=0.3, max_epochs=15, patience=15)
    overridden = fit_vertex(spec, cluster_data, split, heavy_dropout, 0)
    assert overridden.metrics.train_loss_curve == plain.metrics.train_loss_curve


def test_non_finite_loss_raises_diverged(cluster_data) -> None:
    features = cluster_data.features.copy()
    features[0, 0] = np.nan
    broken = VertexDataset("broken", features, cluster_data.labels, cluster_data.graph, ["a", "b"])
    with pytest.raises(DivergedLoss) as info:
        _cluster_run(broken, max_epochs=5)
    assert info.value.epoch == 1


def test_planted_direction_is_learned() -> None:
    summary = run_experiment(_smoke("smoke_planted_direction"))
    assert [run.seed for run in summary.runs] == [0, 1]
    assert all(run.test_acc >= 0.9 for run in summary.runs)


def test_untrained_link_model_is_near_chance(planted_data) -> None:
    task = make_link_task(planted_data.graph, (0.4, 0.3, 0.3), seed=0)
    spec = build_link_model(8, "dpgcnn", width=8)
    cfg = TrainConfig(max_epochs=0, dropout_keep=1.0)
    run = train_link(spec, planted_data.features, task, cfg, seed=0)
    assert 0.2 <= run.test_acc <= 0.8


def test_link_dpgcnn_beats_primal_gat_with_fewer_parameters() -> None:
    """Primal GAT gets the wider layers and still loses on planted directions."""
    data = planted_direction(n=60, q=8, seed=3)
    specs = {
        "primal_gat": build_link_model(8, "primal_gat", width=17),
        "dpgcnn": build_link_model(8, "dpgcnn", width=8),
    }
    params = {name: count_params(Model.init(spec, Rng(0), 8)) for name, spec in specs.items()}
    assert params == {"primal_gat": 886, "dpgcnn": 842}

    cfg = TrainConfig(lr=0.01, weight_decay=0.0, dropout_keep=1.0, max_epochs=200, patience=40)
    accuracy = {name: [] for name in specs}
    for seed in range(4):
        task = make_link_task(data.graph, (0.5, 0.2, 0.2), seed)
        for name, spec in specs.items():
            run = train_link(spec, data.features, task, cfg, seed, timestamps=False)
            accuracy[name].append(run.test_acc)
    assert np.mean(accuracy["dpgcnn"]) > np.mean(accuracy["primal_gat"])


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def test_single_seed_sweep_has_zero_spread() -> None:
    summary = run_sweep("one", [4], _fake_run)
    assert summary.mean_test_acc == pytest.approx(0.54)
    assert summary.std_test_acc == 0.0


def test_sweep_is_order_free() -> None:
    a = run_sweep("s", [3, 1, 2], _fake_run).to_dict()
    b = run_sweep("s", [1, 2, 3], _fake_run).to_dict()
    c = run_sweep("s", [2, 3, 1], _fake_run, jobs=3).to_dict()
    assert a == b == c
    assert [r["seed"] for r in a["runs"]] == [1, 2, 3]


def test_sweep_population_std() -> None:
    summary = SweepSummary("s", [RunMetrics(0, test_acc=0.8), RunMetrics(1, test_acc=0.6)])
    assert summary.mean_test_acc == pytest.approx(0.7)
    assert summary.std_test_acc == pytest.approx(0.1)


def test_sweep_allows_repeated_seeds() -> None:
    summary = run_sweep("dup", [2, 2], _fake_run)
    assert len(summary.runs) == 2
    assert summary.std_test_acc == 0.0


def test_empty_sweep_rejected() -> None:
    with pytest.raises(PreconditionError):
        run_sweep("none", [], _fake_run)


def _failing(bad: set, diverge: bool = False):
    def run_one(seed: int) -> RunMetrics:
        if seed in bad:
            if diverge:
                raise DivergedLoss(seed, 7, float("nan"))
            raise RuntimeError(f"boom {seed}")
        return _fake_run(seed)

    return run_one


@pytest.mark.parametrize("jobs", [1, 3])
def test_sweep_failure_names_lowest_seed(jobs: int) -> None:
    with pytest.raises(SweepRunError) as info:
        run_sweep("f", [5, 2, 7], _failing({5, 7}), jobs=jobs)
    assert info.value.seed == 5


def test_sweep_continue_on_failure() -> None:
    with patch.object(sweep.log, "error") as mock_error:
        summary = run_sweep("f", [1, 2, 3], _failing({2}, diverge=True), continue_on_failure=True)
    assert [r.seed for r in summary.runs] == [1, 3]
    assert [f.to_dict()["seed"] for f in summary.failures] == [2]
    assert summary.failures[0].diverged
    assert mock_error.call_args.args[0] == "run_failed"


def test_sweep_logs_summary() -> None:
    with patch.object(sweep.log, "info") as mock_info:
        run_sweep("logged", [0, 1], _fake_run)
    events = [c.args[0] for c in mock_info.call_args_list]
    assert events == ["sweep_finished"]
    assert mock_info.call_args.kwargs["runs"] == 2


def test_with_epochs_clips_patience() -> None:
    experiment = _smoke("smoke_two_cluster")
    short = with_epochs(experiment, 10)
    assert (short.train.max_epochs, short.train.patience) == (10, 10)
    assert experiment.train.max_epochs == 200


def test_experiment_runner_uses_seed_for_split() -> None:
    runner = ExperimentRunner(with_epochs(_smoke("smoke_two_cluster"), 0), timestamps=False)
    a, b = runner.fit(0), runner.fit(1)
    assert not np.array_equal(a.masks.train, b.masks.train)
    assert a.metrics.wall_ms == 0.0


# ---------------------------------------------------------------------------
# Metric files
# ---------------------------------------------------------------------------


def test_write_metrics(tmp_path) -> None:
    summary = run_sweep("files", [0, 1], _fake_run)
    written = write_metrics(summary, tmp_path / "out", timestamps=False)
    assert sorted(p.name for p in written) == ["run_0.json", "run_1.json", "summary.json"]
    data = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert data["name"] == "files"
    assert data["params"] == 10
    assert [r["wall_ms"] for r in data["runs"]] == [0, 0]
    assert (tmp_path / "out" / "run_0.json").read_text().endswith("}\n")


# ---------------------------------------------------------------------------
# Citation datasets
# ---------------------------------------------------------------------------


@pytest.mark.slow
def test_cora_gat_and_dpgcnn(data_dir) -> None:
    gat = run_experiment(_smoke("cora_gat", data_dir))
    dpgcnn = run_experiment(_smoke("cora_dpgcnn", data_dir))
    assert gat.mean_test_acc >= 0.81
    assert dpgcnn.mean_test_acc >= 0.82
    assert dpgcnn.mean_test_acc >= gat.mean_test_acc - 0.003


@pytest.mark.slow
def test_cora_training_set_is_fit(data_dir) -> None:
    summary = run_experiment(_smoke("cora_dpgcnn", data_dir), seeds=[0])
    assert summary.runs[0].train_acc >= 0.99


@pytest.mark.slow
def test_citeseer_dpgcnn(data_dir) -> None:
    if not (data_dir / "citeseer" / "citeseer.content").exists():
        pytest.skip("citeseer files not found")
    summary = run_experiment(_smoke("citeseer_dpgcnn", data_dir))
    assert len(summary.runs) == 10
    assert summary.mean_test_acc >= 0.70


@pytest.mark.slow
def test_poly_first_order_is_best(data_dir) -> None:
    p1 = run_experiment(_smoke("cora500_poly_p1", data_dir))
    p6 = run_experiment(_smoke("cora500_poly_p6", data_dir))
    assert p1.mean_test_acc >= 0.87
    assert p1.mean_test_acc >= p6.mean_test_acc - 0.005


@pytest.mark.slow
def test_cora_link_direction_dpgcnn_beats_primal_gat(data_dir) -> None:
    primal = run_experiment(_smoke("link_primal", data_dir))
    dpgcnn = run_experiment(_smoke("link_dpgcnn", data_dir))
    assert len(primal.runs) == len(dpgcnn.runs) == 10
    assert dpgcnn.mean_test_acc > primal.mean_test_acc
