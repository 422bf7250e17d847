"""Parameter holders for every layer kind.

Each holder keeps one (W, a) pair per attention head. ``init`` draws
every parameter from a child stream named after the parameter, so adding
or removing a layer never changes the initial values of the others.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from dpgcnn.autodiff.init import glorot_uniform
from dpgcnn.autodiff.rng import Rng
from dpgcnn.autodiff.tensor import Parameter


def glorot_param(name: str, rows: int, cols: int, rng: Rng) -> Parameter:
    return Parameter(name, glorot_uniform(rows, cols, rng.spawn(name)).value)


def _head_params(prefix: str, heads: int, w_shape: tuple, a_rows: int, rng: Rng) -> tuple:
    w = [glorot_param(f"{prefix}.head{h}.W", *w_shape, rng) for h in range(heads)]
    a = [glorot_param(f"{prefix}.head{h}.a", a_rows, 1, rng) for h in range(heads)]
    return w, a


@dataclass(eq=False)
class GatLayerParams:
    """Per head: W (q x q') and attention vector a (2q' x 1)."""

    W: List[Parameter]
    a: List[Parameter]
    merge: str = "concat"
    activation: str = "elu"

    @property
    def heads(self) -> int:
        return len(self.W)

    @property
    def out_features(self) -> int:
        return int(self.W[0].value.shape[1])

    def parameters(self) -> List[Parameter]:
        return [p for pair in zip(self.W, self.a) for p in pair]

    @classmethod
    def init(
        cls,
        prefix: str,
        q_in: int,
        out: int,
        heads: int,
        rng: Rng,
        merge: str = "concat",
        activation: str = "elu",
    ) -> "GatLayerParams":
        w, a = _head_params(prefix, heads, (q_in, out), 2 * out, rng)
        return cls(w, a, merge, activation)


@dataclass(eq=False)
class DualConvParams:
    """Per dual head: W~ (input width x q~) and a~ (2q~ x 1).

    Dual heads are always concatenated.
    """

    W: List[Parameter]
    a: List[Parameter]
    activation: str = "relu"

    @property
    def heads(self) -> int:
        return len(self.W)

    @property
    def in_features(self) -> int:
        return int(self.W[0].value.shape[0])

    @property
    def width(self) -> int:
        return sum(int(w.value.shape[1]) for w in self.W)

    def parameters(self) -> List[Parameter]:
        return [p for pair in zip(self.W, self.a) for p in pair]

    @classmethod
    def init(
        cls, prefix: str, q_in: int, out: int, heads: int, rng: Rng, activation: str = "relu"
    ) -> "DualConvParams":
        w, a = _head_params(prefix, heads, (q_in, out), 2 * out, rng)
        return cls(w, a, activation)


@dataclass(eq=False)
class PrimalConvParams:
    """Per head: W (q x q') and a (dual width x 1) scoring one dual feature row."""

    W: List[Parameter]
    a: List[Parameter]
    merge: str = "concat"
    activation: str = "elu"

    @property
    def heads(self) -> int:
        return len(self.W)

    def parameters(self) -> List[Parameter]:
        return [p for pair in zip(self.W, self.a) for p in pair]

    @classmethod
    def init(
        cls,
        prefix: str,
        q_in: int,
        out: int,
        heads: int,
        dual_width: int,
        rng: Rng,
        merge: str = "concat",
        activation: str = "elu",
    ) -> "PrimalConvParams":
        w, a = _head_params(prefix, heads, (q_in, out), dual_width, rng)
        return cls(w, a, merge, activation)


@dataclass(eq=False)
class DpgcnnBlockParams:
    """One dual-primal layer.

    The dual conv reads [P_i, P_j] where P is the concatenation of every
    primal head's projection, optionally prefixed by the previous layer's
    edge features, so ``dual.in_features`` is ``edge_in + 2 * heads * q'``.
    """

    primal: PrimalConvParams
    dual: DualConvParams
    edge_in: int = 0

    def parameters(self) -> List[Parameter]:
        return self.primal.parameters() + self.dual.parameters()

    @classmethod
    def init(
        cls,
        prefix: str,
        q_in: int,
        out: int,
        heads: int,
        dual_out: int,
        dual_heads: int,
        rng: Rng,
        merge: str = "concat",
        activation: str = "elu",
        dual_activation: str = "relu",
        edge_in: int = 0,
    ) -> "DpgcnnBlockParams":
        dual = DualConvParams.init(
            f"{prefix}.dual",
            edge_in + 2 * heads * out,
            dual_out,
            dual_heads,
            rng,
            dual_activation,
        )
        primal = PrimalConvParams.init(
            prefix, q_in, out, heads, dual.width, rng, merge, activation
        )
        return cls(primal, dual, edge_in)


@dataclass(eq=False)
class PolyConvParams:
    """Polynomial attention filter of order p.

    ``theta[l]`` (q x q') mixes the l-step diffusion. ``attention[k - 1]``
    scores order k: a 2q' x 1 vector over [h_i, h_j] with h = F theta[0],
    or, when ``dual`` is set, a q~ x 1 vector over the dual output row of
    the arc.
    """

    theta: List[Parameter]
    attention: List[Parameter]
    activation: str = "elu"
    dual: Optional[DualConvParams] = None

    @property
    def order(self) -> int:
        return len(self.theta) - 1

    def parameters(self) -> List[Parameter]:
        extra = self.dual.parameters() if self.dual is not None else []
        return list(self.theta) + list(self.attention) + extra

    @classmethod
    def init(
        cls,
        prefix: str,
        q_in: int,
        out: int,
        order: int,
        rng: Rng,
        activation: str = "elu",
        dual_out: Optional[int] = None,
        dual_heads: int = 1,
        dual_activation: str = "relu",
    ) -> "PolyConvParams":
        theta = [glorot_param(f"{prefix}.theta{i}", q_in, out, rng) for i in range(order + 1)]
        dual = None
        score_rows = 2 * out
        if dual_out is not None:
            dual = DualConvParams.init(
                f"{prefix}.dual", 2 * out, dual_out, dual_heads, rng, dual_activation
            )
            score_rows = dual.width
        attention = [
            glorot_param(f"{prefix}.order{k}.a", score_rows, 1, rng) for k in range(1, order + 1)
        ]
        return cls(theta, attention, activation, dual)


@dataclass(eq=False)
class DenseParams:
    """Affine map; ``b`` is None for the bias-free reduction layer."""

    W: Parameter
    b: Optional[Parameter] = None

    def parameters(self) -> List[Parameter]:
        return [self.W] if self.b is None else [self.W, self.b]

    @classmethod
    def init(cls, prefix: str, q_in: int, out: int, rng: Rng, bias: bool) -> "DenseParams":
        b = Parameter(f"{prefix}.b", np.zeros((1, out))) if bias else None
        return cls(glorot_param(f"{prefix}.W", q_in, out, rng), b)

