"""Graph attention layer over the primal graph."""

from __future__ import annotations

from typing import Optional

import numpy as np

from dpgcnn.autodiff import ops
from dpgcnn.autodiff.tensor import Tape, Tensor
from dpgcnn.graph.primal import DirectedGraph
from dpgcnn.layers.common import (
    Dropout,
    activate,
    attend,
    check_rows,
    drop,
    merge_heads,
    require_neighbors,
)
from dpgcnn.layers.params import GatLayerParams


def attention_logits(
    projected: Tensor, a: Tensor, receivers: np.ndarray, senders: np.ndarray
) -> Tensor:
    """LeakyReLU(a . [h_receiver, h_sender]) for every edge, as an m x 1 column."""
    width = projected.cols
    left = ops.matmul(projected, ops.row_slice(a, 0, width))
    right = ops.matmul(projected, ops.row_slice(a, width, 2 * width))
    return ops.leaky_relu(
        ops.add(ops.gather_rows(left, receivers), ops.gather_rows(right, senders))
    )


def gat_forward(
    F: Tensor,
    g: DirectedGraph,
    params: GatLayerParams,
    tape: Tape,
    dropout: Optional[Dropout] = None,
) -> Tensor:
    """One multi-head attention layer.

    Vertex i attends over its incoming arcs (j, i); self-loops must already
    be on ``g`` if the vertex should attend to itself.

    Raises:
        ShapeMismatch: If F does not have g.n rows or W's row count.
        EmptyNeighborhood: If a vertex has no incoming arcs.
    """
    check_rows(F, g.n, "vertex features")
    nb = g.neighborhoods()
    require_neighbors(nb)
    x = drop(dropout, F)

    heads = []
    for W, a in zip(params.W, params.a):
        projected = ops.matmul(x, tape.watch(W))
        logits = attention_logits(projected, tape.watch(a), nb.receivers, nb.senders)
        alpha = drop(dropout, ops.segment_softmax(logits, nb.receivers, nb.count))
        heads.append(attend(projected, alpha, nb, nb.senders))
    return activate(params.activation, merge_heads(heads, params.merge))


def gat_attention(F: Tensor, g: DirectedGraph, params: GatLayerParams, head: int = 0) -> Tensor:
    """Attention coefficients of one head, per arc, without recording gradients."""
    nb = g.neighborhoods()
    projected = ops.matmul(F, Tensor(params.W[head].value))
    logits = attention_logits(projected, Tensor(params.a[head].value), nb.receivers, nb.senders)
    return ops.segment_softmax(logits, nb.receivers, nb.count)
