"""Training loops, seed sweeps, metrics and gradient-check suites."""

from dpgcnn.training.metrics import RunFailure, RunMetrics, SweepSummary, write_metrics
from dpgcnn.training.sweep import ExperimentRunner, run_experiment, run_sweep
from dpgcnn.training.trainer import (
    EarlyStopping,
    Masks,
    TrainedRun,
    evaluate,
    fit,
    fit_link,
    fit_vertex,
    predict,
    train_link,
    train_vertex,
)

__all__ = [
    "EarlyStopping",
    "ExperimentRunner",
    "Masks",
    "RunFailure",
    "RunMetrics",
    "SweepSummary",
    "TrainedRun",
    "evaluate",
    "fit",
    "fit_link",
    "fit_vertex",
    "predict",
    "run_experiment",
    "run_sweep",
    "train_link",
    "train_vertex",
    "write_metrics",
]
