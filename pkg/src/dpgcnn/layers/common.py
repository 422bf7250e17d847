"""Pieces shared by every layer: activations, head merging, dropout plans."""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Optional, Sequence

import numpy as np

from dpgcnn.autodiff import ops
from dpgcnn.autodiff.rng import Rng
from dpgcnn.autodiff.tensor import Tensor
from dpgcnn.errors import EmptyNeighborhood, ShapeMismatch
from dpgcnn.graph.primal import Neighborhoods


@dataclass
class Dropout:
    """Dropout applied to layer inputs and attention coefficients."""

    keep_prob: float
    rng: Rng
    training: bool = True

    def __call__(self, x: Tensor) -> Tensor:
        return ops.dropout(x, self.keep_prob, self.rng, self.training)


def drop(plan: Optional[Dropout], x: Tensor) -> Tensor:
    return x if plan is None else plan(x)


def activate(name: str, x: Tensor) -> Tensor:
    """Apply a named activation.

    ``softmax`` leaves the logits untouched: the loss applies the softmax,
    and predictions go through ops.row_softmax.
    """
    if name == "elu":
        return ops.elu(x)
    if name == "relu":
        return ops.relu(x)
    if name in ("none", "softmax"):
        return x
    raise ValueError(f"unknown activation {name!r}")


def merge_heads(heads: Sequence[Tensor], merge: str) -> Tensor:
    if len(heads) == 1:
        return heads[0]
    if merge == "concat":
        return reduce(ops.concat_cols, heads)
    if merge == "average":
        return ops.scale(reduce(ops.add, heads), 1.0 / len(heads))
    raise ValueError(f"unknown head merge {merge!r}")


def require_neighbors(nb: Neighborhoods) -> None:
    """Raise if some receiver has nothing to attend over."""
    empty = np.flatnonzero(nb.degrees() == 0)
    if empty.size:
        raise EmptyNeighborhood(
            f"vertex {int(empty[0])} has no incoming arcs ({empty.size} such vertices)"
        )


def check_rows(x: Tensor, rows: int, what: str) -> None:
    if x.rows != rows:
        raise ShapeMismatch(f"{what} has {x.rows} rows, expected {rows}")


def attend(values: Tensor, alpha: Tensor, nb: Neighborhoods, senders: np.ndarray) -> Tensor:
    """Sum over each receiver's edges of alpha times the sender's value row."""
    weighted = ops.mul_rows(ops.gather_rows(values, senders), alpha)
    return ops.segment_sum(weighted, nb.receivers, nb.count)
