"""Per-run metrics, sweep aggregation and their JSON form."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union


@dataclass
class RunMetrics:
    """Everything one training run reports.

    Curves hold one entry per completed epoch; ``best_epoch`` is the epoch
    whose weights were restored (0 means the untrained model).
    """

    seed: int
    epochs: int = 0
    best_epoch: int = 0
    test_acc: float = 0.0
    val_acc: float = 0.0
    val_loss: float = 0.0
    train_acc: float = 0.0
    params: int = 0
    wall_ms: float = 0.0
    stopped_early: bool = False
    train_loss_curve: List[float] = field(default_factory=list)
    train_acc_curve: List[float] = field(default_factory=list)
    val_loss_curve: List[float] = field(default_factory=list)
    val_acc_curve: List[float] = field(default_factory=list)

    def to_dict(self, timestamps: bool = True) -> Dict[str, Any]:
        return {
            "seed": self.seed,
            "epochs": self.epochs,
            "best_epoch": self.best_epoch,
            "stopped_early": self.stopped_early,
            "test_acc": self.test_acc,
            "val_acc": self.val_acc,
            "val_loss": self.val_loss,
            "train_acc": self.train_acc,
            "params": self.params,
            "wall_ms": round(self.wall_ms, 3) if timestamps else 0,
            "train_loss_curve": self.train_loss_curve,
            "train_acc_curve": self.train_acc_curve,
            "val_loss_curve": self.val_loss_curve,
            "val_acc_curve": self.val_acc_curve,
        }


@dataclass
class RunFailure:
    seed: int
    error: str
    diverged: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {"seed": self.seed, "error": self.error, "diverged": self.diverged}


@dataclass
class SweepSummary:
    """Mean and population standard deviation of test accuracy over runs.

    Runs are kept sorted by seed and summed with math.fsum, so the
    aggregate does not depend on the order the runs finished in.
    """

    name: str
    runs: List[RunMetrics]
    failures: List[RunFailure] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.runs = sorted(self.runs, key=lambda r: r.seed)
        self.failures = sorted(self.failures, key=lambda f: f.seed)

    @property
    def mean_test_acc(self) -> float:
        if not self.runs:
            return float("nan")
        return math.fsum(r.test_acc for r in self.runs) / len(self.runs)

    @property
    def std_test_acc(self) -> float:
        if not self.runs:
            return float("nan")
        mean = self.mean_test_acc
        return math.sqrt(math.fsum((r.test_acc - mean) ** 2 for r in self.runs) / len(self.runs))

    @property
    def params(self) -> Optional[int]:
        return self.runs[0].params if self.runs else None

    def to_dict(self, timestamps: bool = True) -> Dict[str, Any]:
        return {
            "name": self.name,
            "mean_test_acc": self.mean_test_acc,
            "std_test_acc": self.std_test_acc,
            "params": self.params,
            "runs": [r.to_dict(timestamps) for r in self.runs],
            "failures": [f.to_dict() for f in self.failures],
        }

    def headline(self) -> str:
        return (
            f"{self.name}: test accuracy {100 * self.mean_test_acc:.2f} "
            f"+/- {100 * self.std_test_acc:.2f}% over {len(self.runs)} runs"
        )


def dumps(data: Any) -> str:
    """Canonical JSON text (sorted keys, two-space indent, trailing newline)."""
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def write_metrics(
    summary: SweepSummary, out_dir: Union[str, Path], timestamps: bool = True
) -> List[Path]:
    """Write ``summary.json`` and one ``run_<seed>.json`` per run."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for run in summary.runs:
        path = out / f"run_{run.seed}.json"
        path.write_text(dumps(run.to_dict(timestamps)), encoding="utf-8")
        written.append(path)
    path = out / "summary.json"
    path.write_text(dumps(summary.to_dict(timestamps)), encoding="utf-8")
    written.append(path)
    return written
