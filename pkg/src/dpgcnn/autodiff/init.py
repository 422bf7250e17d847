"""Parameter initialisers."""

from __future__ import annotations

import numpy as np

from dpgcnn.autodiff.rng import Rng
from dpgcnn.autodiff.tensor import Tensor
from dpgcnn.errors import ShapeMismatch


def glorot_uniform(rows: int, cols: int, rng: Rng) -> Tensor:
    """Uniform on [-limit, limit) with limit = sqrt(6 / (rows + cols))."""
    if rows < 1 or cols < 1:
        raise ShapeMismatch(f"glorot_uniform needs positive dims, got {rows}x{cols}")
    limit = np.sqrt(6.0 / (rows + cols))
    return Tensor((2.0 * rng.uniform((rows, cols)) - 1.0) * limit)


def zeros(rows: int, cols: int) -> Tensor:
    return Tensor(np.zeros((rows, cols)))
