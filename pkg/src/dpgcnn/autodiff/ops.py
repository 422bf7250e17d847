"""Differentiable ops on 2-D tensors.

Each op records onto the tape of its first tracked input. If no input is
tracked the result is a constant and nothing is recorded. Index arguments
(row ids, segment ids, labels) are plain integer arrays, never tensors.
"""

from __future__ import annotations

from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
from numpy.typing import ArrayLike, NDArray

from dpgcnn.autodiff.rng import Rng
from dpgcnn.autodiff.tensor import Array, Tensor, Vjp, tape_of
from dpgcnn.errors import (
    EmptyMask,
    EmptySegment,
    IndexOutOfRange,
    PreconditionError,
    ShapeMismatch,
)

IntArray = NDArray[np.int64]

LEAKY_SLOPE = 0.2


def _record(op: str, value: Array, parents: Tuple[Tensor, ...], vjp: Vjp) -> Tensor:
    tape = tape_of(*parents)
    if tape is None:
        return Tensor(value)
    return tape.record(op, value, parents, vjp)


def as_index(index: ArrayLike, size: int, what: str = "row") -> IntArray:
    """Validate an id array against ``[0, size)``.

    Raises:
        IndexOutOfRange: If any id falls outside the range.
    """
    idx = np.asarray(index, dtype=np.int64).reshape(-1)
    if idx.size and (int(idx.min()) < 0 or int(idx.max()) >= size):
        raise IndexOutOfRange(f"{what} ids must lie in [0, {size})")
    return idx


def scatter_rows(values: Array, index: IntArray, size: int) -> Array:
    """Sum rows of ``values`` into ``size`` buckets given by ``index``."""
    m, c = values.shape
    if m == 0 or c == 0:
        return np.zeros((size, c))
    agg = sp.csr_matrix((np.ones(m), (index, np.arange(m))), shape=(size, m))
    return np.asarray(agg @ values)


# ---------------------------------------------------------------------------
# Linear algebra and shape ops
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.cols != b.rows:
        raise ShapeMismatch(f"matmul {a.rows}x{a.cols} by {b.rows}x{b.cols}")
    av, bv = a.value, b.value
    return _record("matmul", av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeMismatch(f"add {a.shape} and {b.shape}")
    return _record("add", a.value + b.value, (a, b), lambda g: (g, g))


def add_bias(a: Tensor, bias: Tensor) -> Tensor:
    """Add a 1 x c row to every row of ``a``."""
    if bias.rows != 1 or bias.cols != a.cols:
        raise ShapeMismatch(f"bias {bias.shape} does not fit {a.shape}")
    return _record(
        "add_bias", a.value + bias.value, (a, bias), lambda g: (g, g.sum(axis=0, keepdims=True))
    )


def scale(a: Tensor, factor: float) -> Tensor:
    return _record("scale", a.value * factor, (a,), lambda g: (g * factor,))


def mul_rows(a: Tensor, weights: Tensor) -> Tensor:
    """Multiply row r of ``a`` by the scalar ``weights[r, 0]``."""
    if weights.cols != 1 or weights.rows != a.rows:
        raise ShapeMismatch(f"row weights {weights.shape} do not fit {a.shape}")
    av, wv = a.value, weights.value
    return _record(
        "mul_rows",
        av * wv,
        (a, weights),
        lambda g: (g * wv, (g * av).sum(axis=1, keepdims=True)),
    )


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    if a.rows != b.rows:
        raise ShapeMismatch(f"concat_cols with {a.rows} and {b.rows} rows")
    split = a.cols
    return _record(
        "concat_cols",
        np.concatenate([a.value, b.value], axis=1),
        (a, b),
        lambda g: (g[:, :split], g[:, split:]),
    )


def row_slice(a: Tensor, start: int, stop: int) -> Tensor:
    """Rows ``start:stop`` of ``a``."""
    if not 0 <= start <= stop <= a.rows:
        raise ShapeMismatch(f"row slice {start}:{stop} of {a.rows} rows")
    shape = a.value.shape

    def vjp(g: Array) -> Tuple[Optional[Array], ...]:
        full = np.zeros(shape)
        full[start:stop] = g
        return (full,)

    return _record("row_slice", a.value[start:stop], (a,), vjp)


def sum_all(a: Tensor) -> Tensor:
    shape = a.value.shape
    return _record(
        "sum_all", np.array([[a.value.sum()]]), (a,), lambda g: (np.full(shape, g[0, 0]),)
    )


# ---------------------------------------------------------------------------
# Sparse neighbourhood primitives
# ---------------------------------------------------------------------------


def gather_rows(a: Tensor, index: ArrayLike) -> Tensor:
    """Row k of the result is row ``index[k]`` of ``a``.

    Raises:
        IndexOutOfRange: On an id >= a.rows.
    """
    idx = as_index(index, a.rows)
    n = a.rows
    return _record("gather_rows", a.value[idx], (a,), lambda g: (scatter_rows(g, idx, n),))


def segment_sum(a: Tensor, segments: ArrayLike, num_segments: int) -> Tensor:
    """Sum rows sharing a segment id; empty segments give zero rows.

    Raises:
        IndexOutOfRange: On a segment id >= num_segments.
        ShapeMismatch: If there is not one segment id per row.
    """
    seg = as_index(segments, num_segments, "segment")
    if seg.shape[0] != a.rows:
        raise ShapeMismatch(f"{seg.shape[0]} segment ids for {a.rows} rows")
    return _record(
        "segment_sum",
        scatter_rows(a.value, seg, num_segments),
        (a,),
        lambda g: (g[seg],),
    )


def segment_softmax(
    logits: Tensor,
    segments: ArrayLike,
    num_segments: int,
    require_nonempty: bool = False,
) -> Tensor:
    """Softmax of a column of logits within each segment.

    The per-segment maximum is subtracted before exponentiation.

    Args:
        logits: m x 1 scores.
        segments: Segment id of every row.
        num_segments: Segment count S.
        require_nonempty: Raise if some segment has no rows.

    Raises:
        EmptySegment: If ``require_nonempty`` and a segment is empty.
    """
    if logits.cols != 1:
        raise ShapeMismatch(f"segment_softmax takes m x 1 logits, got {logits.shape}")
    seg = as_index(segments, num_segments, "segment")
    if seg.shape[0] != logits.rows:
        raise ShapeMismatch(f"{seg.shape[0]} segment ids for {logits.rows} rows")
    if require_nonempty:
        empty = np.flatnonzero(np.bincount(seg, minlength=num_segments) == 0)
        if empty.size:
            raise EmptySegment(f"segment {int(empty[0])} has no rows")

    x = logits.value[:, 0]
    peak = np.full(num_segments, -np.inf)
    np.maximum.at(peak, seg, x)
    e = np.exp(x - peak[seg])
    p = e / np.bincount(seg, weights=e, minlength=num_segments)[seg]

    def vjp(g: Array) -> Tuple[Optional[Array], ...]:
        gp = g[:, 0] * p
        dot = np.bincount(seg, weights=gp, minlength=num_segments)
        return ((gp - p * dot[seg])[:, None],)

    return _record("segment_softmax", p[:, None], (logits,), vjp)


def row_softmax(a: Tensor) -> Tensor:
    z = a.value - a.value.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)
    return _record(
        "row_softmax", p, (a,), lambda g: (p * (g - (g * p).sum(axis=1, keepdims=True)),)
    )


# ---------------------------------------------------------------------------
# Activations and dropout
# ---------------------------------------------------------------------------


def leaky_relu(a: Tensor, slope: float = LEAKY_SLOPE) -> Tensor:
    pos = a.value >= 0
    d = np.where(pos, 1.0, slope)
    return _record("leaky_relu", a.value * d, (a,), lambda g: (g * d,))


def relu(a: Tensor) -> Tensor:
    pos = a.value >= 0
    return _record("relu", np.where(pos, a.value, 0.0), (a,), lambda g: (g * pos,))


def elu(a: Tensor) -> Tensor:
    pos = a.value >= 0
    neg = np.expm1(np.minimum(a.value, 0.0))
    d = np.where(pos, 1.0, neg + 1.0)
    return _record("elu", np.where(pos, a.value, neg), (a,), lambda g: (g * d,))


def dropout(a: Tensor, keep_prob: float, rng: Optional[Rng], training: bool = True) -> Tensor:
    """Inverted dropout; the identity in eval mode or at keep_prob 1."""
    if not 0.0 < keep_prob <= 1.0:
        raise PreconditionError(f"keep_prob must lie in (0, 1], got {keep_prob}")
    if not training or keep_prob == 1.0 or a.value.size == 0:
        return a
    if rng is None:
        raise PreconditionError("training-mode dropout needs an rng")
    mask = (rng.uniform(a.value.shape) < keep_prob) / keep_prob
    return _record("dropout", a.value * mask, (a,), lambda g: (g * mask,))


# ---------------------------------------------------------------------------
# Loss
# ---------------------------------------------------------------------------


def mask_rows(mask: Union[ArrayLike, Sequence[int]], n: int) -> IntArray:
    """Row ids selected by a boolean mask of length n or an id list."""
    arr = np.asarray(mask)
    if arr.dtype == bool:
        if arr.shape[0] != n:
            raise ShapeMismatch(f"boolean mask of length {arr.shape[0]} for {n} rows")
        return np.flatnonzero(arr).astype(np.int64)
    return as_index(arr, n)


def log_softmax_rows(z: Array) -> Array:
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def masked_softmax_cross_entropy(
    logits: Tensor, labels: ArrayLike, mask: Union[ArrayLike, Sequence[int]]
) -> Tensor:
    """Mean cross-entropy over the masked rows; a 1x1 tensor.

    Raises:
        EmptyMask: If the mask selects no rows.
        IndexOutOfRange: If a masked label is not a valid class.
    """
    n, classes = logits.shape
    rows = mask_rows(mask, n)
    if rows.size == 0:
        raise EmptyMask("loss mask selects no rows")
    y = np.asarray(labels, dtype=np.int64).reshape(-1)[rows]
    if int(y.min()) < 0 or int(y.max()) >= classes:
        raise IndexOutOfRange(f"labels must lie in [0, {classes}) on masked rows")

    logp = log_softmax_rows(logits.value[rows])
    pick = np.arange(rows.shape[0])
    loss = -logp[pick, y].mean()
    count = rows.shape[0]
    shape = logits.value.shape

    def vjp(g: Array) -> Tuple[Optional[Array], ...]:
        local = np.exp(logp)
        local[pick, y] -= 1.0
        full = np.zeros(shape)
        np.add.at(full, rows, local * (g[0, 0] / count))
        return (full,)

    return _record("cross_entropy", np.array([[loss]]), (logits,), vjp)
