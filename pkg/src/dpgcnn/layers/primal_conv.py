"""Primal convolution scored by dual features, and the dual-primal block."""

from __future__ import annotations

from typing import List, Optional, Tuple

from dpgcnn.autodiff import ops
from dpgcnn.autodiff.tensor import Tape, Tensor
from dpgcnn.errors import ShapeMismatch
from dpgcnn.graph.dual import DualGraph, DualMode
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
from dpgcnn.layers.dual_conv import DualFeatures, dual_conv_forward
from dpgcnn.layers.params import DpgcnnBlockParams, PrimalConvParams


def arc_features(F_dual: Tensor, g: DirectedGraph, dual: Optional[DualGraph] = None) -> Tensor:
    """Dual output rows re-indexed by primal arc id.

    classic_line_graph duals have one vertex per undirected edge, shared
    by both orientations; chain and fan duals are already arc-indexed.
    """
    if dual is not None and dual.mode is DualMode.CLASSIC:
        return ops.gather_rows(F_dual, dual.arc_to_dual)
    if F_dual.rows != g.num_arcs:
        raise ShapeMismatch(f"dual features have {F_dual.rows} rows for {g.num_arcs} arcs")
    return F_dual


def primal_conv_forward(
    F: Tensor,
    F_dual: Tensor,
    g: DirectedGraph,
    params: PrimalConvParams,
    tape: Tape,
    dropout: Optional[Dropout] = None,
    projections: Optional[List[Tensor]] = None,
    summand: str = "neighbor",
    dual: Optional[DualGraph] = None,
) -> Tensor:
    """Vertex aggregation with attention logits LeakyReLU(a . f~'_arc).

    Vertex i sums alpha_ji * f_j W over its incoming arcs (j, i). With
    ``summand="self"`` the summed row is f_i W instead.

    Args:
        F: n x q vertex features.
        F_dual: Dual layer output, one row per dual vertex.
        g: Primal graph the dual was built from.
        params: Per-head W and a.
        tape: Tape to record on.
        dropout: Input and attention dropout.
        projections: Per-head F W already computed by the caller.
        summand: ``neighbor`` or ``self``.
        dual: Needed to map classic_line_graph rows onto arcs.

    Raises:
        ShapeMismatch: On inconsistent row counts or widths.
        EmptyNeighborhood: If a vertex has no incoming arcs.
    """
    if summand not in ("neighbor", "self"):
        raise ValueError(f"unknown summand {summand!r}")
    check_rows(F, g.n, "vertex features")
    per_arc = arc_features(F_dual, g, dual)
    nb = g.neighborhoods()
    require_neighbors(nb)

    if projections is None:
        x = drop(dropout, F)
        projections = [ops.matmul(x, tape.watch(W)) for W in params.W]
    rows = nb.senders if summand == "neighbor" else nb.receivers

    heads = []
    for projected, a in zip(projections, params.a):
        logits = ops.leaky_relu(ops.matmul(per_arc, tape.watch(a)))
        alpha = drop(dropout, ops.segment_softmax(logits, nb.receivers, nb.count))
        heads.append(attend(projected, alpha, nb, rows))
    return activate(params.activation, merge_heads(heads, params.merge))


def dpgcnn_block(
    F: Tensor,
    g: DirectedGraph,
    dual: DualGraph,
    params: DpgcnnBlockParams,
    tape: Tape,
    dropout: Optional[Dropout] = None,
    edge: Optional[Tensor] = None,
    summand: str = "neighbor",
) -> Tuple[Tensor, Tensor]:
    """Dual convolution then primal convolution; returns (F', F~').

    The per-head projections P_h = F W_h are computed once. The dual conv
    reads [E, P_i, P_j] (E only when ``edge`` is given) and the primal conv
    aggregates the same P_h.
    """
    check_rows(F, g.n, "vertex features")
    x = drop(dropout, F)
    projections = [ops.matmul(x, tape.watch(W)) for W in params.primal.W]
    edge_in = None if edge is None else drop(dropout, edge)
    features = DualFeatures.from_graph(merge_heads(projections, "concat"), g, dual, edge_in)
    F_dual = dual_conv_forward(features, dual, params.dual, tape, dropout)
    F_out = primal_conv_forward(
        F,
        F_dual,
        g,
        params.primal,
        tape,
        dropout,
        projections=projections,
        summand=summand,
        dual=dual,
    )
    return F_out, F_dual
