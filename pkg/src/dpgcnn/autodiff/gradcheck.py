"""Central finite-difference gradient checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from dpgcnn.autodiff.rng import Rng
from dpgcnn.autodiff.tensor import Parameter, Tape, Tensor, backward

LossFn = Callable[[Tape], Tensor]

STEP = 1e-6
FLOOR = 1e-4


def relative_error(analytic: float, numeric: float, floor: float = FLOOR) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


@dataclass
class GradCheckEntry:
    case: str
    parameter: str
    index: Tuple[int, ...]
    analytic: float
    numeric: float
    rel_error: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "case": self.case,
            "parameter": self.parameter,
            "index": list(self.index),
            "analytic": self.analytic,
            "numeric": self.numeric,
            "rel_error": self.rel_error,
        }


@dataclass
class GradCheckResult:
    case: str
    threshold: float
    entries: List[GradCheckEntry] = field(default_factory=list)

    @property
    def max_rel_error(self) -> float:
        return max((e.rel_error for e in self.entries), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.threshold

    def worst(self, k: int = 5) -> List[GradCheckEntry]:
        return sorted(self.entries, key=lambda e: e.rel_error, reverse=True)[:k]


def _loss_value(fn: LossFn) -> float:
    return float(fn(Tape()).value[0, 0])


def check(
    fn: LossFn,
    params: Sequence[Parameter],
    *,
    case: str = "",
    threshold: float = 1e-5,
    step: float = STEP,
    floor: float = FLOOR,
    max_entries: Optional[int] = None,
    rng: Optional[Rng] = None,
) -> GradCheckResult:
    """Compare backward() against central differences for every parameter entry.

    ``fn`` builds the loss on the tape it is given and must be a pure
    function of the parameter values (dropout streams re-seeded per call).
    With ``max_entries`` set, at most that many entries per parameter are
    checked, chosen by ``rng``.
    """
    for p in params:
        p.grad = None
    tape = Tape()
    backward(tape, fn(tape))
    analytic = {
        id(p): np.zeros_like(p.value) if p.grad is None else p.grad.copy() for p in params
    }
    picker = rng if rng is not None else Rng(0).spawn("gradcheck")

    result = GradCheckResult(case=case, threshold=threshold)
    for p in params:
        flat = np.arange(p.size)
        if max_entries is not None and p.size > max_entries:
            flat = np.sort(picker.permutation(p.size)[:max_entries])
        for k in flat:
            idx = tuple(int(i) for i in np.unravel_index(int(k), p.value.shape))
            orig = p.value[idx]
            p.value[idx] = orig + step
            plus = _loss_value(fn)
            p.value[idx] = orig - step
            minus = _loss_value(fn)
            p.value[idx] = orig
            numeric = (plus - minus) / (2.0 * step)
            a = float(analytic[id(p)][idx])
            result.entries.append(
                GradCheckEntry(case, p.name, idx, a, numeric, relative_error(a, numeric, floor))
            )
    return result
