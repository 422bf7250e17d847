"""Seed sweeps: one independent run per seed, aggregated order-free."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Callable, List, Optional, Sequence, Tuple

from dpgcnn.datasets.link import make_link_task
from dpgcnn.datasets.loaders import load_digraph_dataset, load_vertex_dataset, split_spec
from dpgcnn.datasets.splits import make_split
from dpgcnn.errors import PreconditionError, SweepRunError
from dpgcnn.training.metrics import RunFailure, RunMetrics, SweepSummary
from dpgcnn.training.trainer import TrainedRun, fit_link, fit_vertex
from dpgcnn.utils.config import ExperimentConfig
from dpgcnn.utils.logging import get_logger

log = get_logger(__name__)

RunFn = Callable[[int], RunMetrics]
Outcome = Tuple[int, Optional[RunMetrics], Optional[SweepRunError]]


def _attempt(run_one: RunFn, seed: int) -> Outcome:
    try:
        return seed, run_one(seed), None
    except Exception as e:
        failure = SweepRunError(seed, e)
        log.error("run_failed", seed=seed, error=str(e), diverged=failure.diverged)
        return seed, None, failure


def run_sweep(
    name: str,
    seeds: Sequence[int],
    run_one: RunFn,
    jobs: int = 1,
    continue_on_failure: bool = False,
) -> SweepSummary:
    """Run ``run_one`` once per seed and aggregate test accuracy.

    Runs share nothing but read-only inputs, so ``jobs > 1`` fans them out
    over a thread pool. Results are ordered by seed before aggregation.

    Raises:
        PreconditionError: If ``seeds`` is empty.
        SweepRunError: For the lowest failing seed, unless
            ``continue_on_failure`` is set.
    """
    if not seeds:
        raise PreconditionError("a sweep needs at least one seed")

    outcomes: List[Outcome] = []
    if jobs <= 1:
        for seed in seeds:
            outcome = _attempt(run_one, seed)
            if outcome[2] is not None and not continue_on_failure:
                raise outcome[2]
            outcomes.append(outcome)
    else:
        with ThreadPoolExecutor(max_workers=jobs, thread_name_prefix="sweep") as pool:
            outcomes = list(pool.map(lambda s: _attempt(run_one, s), seeds))

    runs = [metrics for _, metrics, _ in outcomes if metrics is not None]
    errors = sorted((e for _, _, e in outcomes if e is not None), key=lambda e: e.seed)
    if errors and not continue_on_failure:
        raise errors[0]

    summary = SweepSummary(
        name=name,
        runs=runs,
        failures=[RunFailure(e.seed, str(e.cause), e.diverged) for e in errors],
    )
    log.info(
        "sweep_finished",
        name=name,
        runs=len(summary.runs),
        failures=len(summary.failures),
        mean_test_acc=round(summary.mean_test_acc, 4),
        std_test_acc=round(summary.std_test_acc, 4),
    )
    return summary


class ExperimentRunner:
    """Loads an experiment's data once and trains one model per seed."""

    def __init__(self, experiment: ExperimentConfig, timestamps: bool = True) -> None:
        self.experiment = experiment
        self.timestamps = timestamps
        if experiment.task == "vertex_classification":
            self.vertex_data = load_vertex_dataset(experiment.dataset)
            self.content = self.vertex_data.content()
        else:
            self.digraph_data = load_digraph_dataset(experiment.dataset)

    def fit(self, seed: int) -> TrainedRun:
        exp = self.experiment
        if exp.task == "vertex_classification":
            split = make_split(self.content, split_spec(exp.dataset, seed))
            return fit_vertex(exp.model, self.vertex_data, split, exp.train, seed, self.timestamps)
        task = make_link_task(self.digraph_data.graph, exp.dataset.link_fractions, seed)
        return fit_link(
            exp.model, self.digraph_data.features, task, exp.train, seed, self.timestamps
        )

    def __call__(self, seed: int) -> RunMetrics:
        return self.fit(seed).metrics


def run_experiment(
    experiment: ExperimentConfig,
    seeds: Optional[Sequence[int]] = None,
    jobs: int = 1,
    continue_on_failure: bool = False,
    timestamps: bool = True,
) -> SweepSummary:
    """Sweep an experiment over ``seeds`` (default: its configured seeds)."""
    runner = ExperimentRunner(experiment, timestamps)
    chosen = list(seeds) if seeds is not None else list(experiment.train.seeds)
    return run_sweep(experiment.name, chosen, runner, jobs, continue_on_failure)


def with_epochs(experiment: ExperimentConfig, max_epochs: int) -> ExperimentConfig:
    """Copy of ``experiment`` with a different epoch budget (patience clipped)."""
    train = replace(
        experiment.train,
        max_epochs=max_epochs,
        patience=min(experiment.train.patience, max_epochs),
    )
    return replace(experiment, train=train)
