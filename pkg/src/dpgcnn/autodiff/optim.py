"""Adam with L2 weight decay folded into the gradient."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Mapping, Optional, Sequence

import numpy as np

from dpgcnn.autodiff.tensor import Array, Parameter
from dpgcnn.errors import ShapeMismatch

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8


@dataclass
class AdamState:
    """First and second moments, one pair per parameter, plus the step count."""

    m: List[Array] = field(default_factory=list)
    v: List[Array] = field(default_factory=list)
    t: int = 0
    beta1: float = BETA1
    beta2: float = BETA2
    eps: float = EPSILON

    @classmethod
    def for_params(cls, params: Sequence[Parameter]) -> "AdamState":
        return cls(
            m=[np.zeros_like(p.value) for p in params],
            v=[np.zeros_like(p.value) for p in params],
        )


def adam_step(
    params: Sequence[Parameter],
    grads: Sequence[Array],
    state: AdamState,
    lr: float,
    weight_decay: float = 0.0,
) -> AdamState:
    """One bias-corrected Adam update, applied to ``params`` in place.

    ``weight_decay * param`` is added to each gradient before the moment
    update.

    Raises:
        ShapeMismatch: If a gradient or moment does not match its parameter.
    """
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise ShapeMismatch("params, grads and optimizer state differ in length")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1**state.t
    correction2 = 1.0 - b2**state.t
    for i, (p, g) in enumerate(zip(params, grads)):
        if g.shape != p.value.shape or state.m[i].shape != p.value.shape:
            raise ShapeMismatch(f"gradient {g.shape} for parameter {p.name} {p.value.shape}")
        if weight_decay:
            g = g + weight_decay * p.value
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g
        m_hat = state.m[i] / correction1
        v_hat = state.v[i] / correction2
        p.value -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return state


class Adam:
    """Stateful optimiser over a fixed parameter list."""

    def __init__(
        self, params: Sequence[Parameter], lr: float, weight_decay: float = 0.0
    ) -> None:
        self.params = list(params)
        self.lr = lr
        self.weight_decay = weight_decay
        self.state = AdamState.for_params(self.params)

    def step(self, grads: Optional[Mapping[Parameter, Array]] = None) -> None:
        """Update from ``grads`` or, when omitted, each parameter's ``grad``."""
        resolved = []
        for p in self.params:
            g = grads.get(p) if grads is not None else p.grad
            resolved.append(np.zeros_like(p.value) if g is None else g)
        adam_step(self.params, resolved, self.state, self.lr, self.weight_decay)
