"""Dual convolution: attention over the dual graph, producing edge features."""

from __future__ import annotations

import weakref
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from dpgcnn.autodiff import ops
from dpgcnn.autodiff.tensor import Tape, Tensor
from dpgcnn.errors import ShapeMismatch
from dpgcnn.graph.dual import DualGraph
from dpgcnn.graph.primal import DirectedGraph, IntArray
from dpgcnn.layers.common import Dropout, activate, attend, drop, merge_heads
from dpgcnn.layers.gat import attention_logits
from dpgcnn.layers.params import DualConvParams
from dpgcnn.utils.logging import get_logger

log = get_logger(__name__)

_warned: "weakref.WeakSet[DualGraph]" = weakref.WeakSet()


def dual_endpoints(g: DirectedGraph, dual: Optional[DualGraph] = None) -> tuple:
    """(src, dst) of the arc each dual vertex stands for."""
    if dual is None:
        return g.src, g.dst
    return g.src[dual.dual_to_arc], g.dst[dual.dual_to_arc]


@dataclass
class DualFeatures:
    """Dual vertex features [E_u, f_i, f_j] held in factored form.

    Row u of the materialised matrix is the previous edge features of u
    (when present) followed by the features of the source and target of
    the arc u stands for. ``project`` multiplies by W~ without building
    the full matrix.
    """

    vertex: Tensor
    src: IntArray
    dst: IntArray
    edge: Optional[Tensor] = None

    @classmethod
    def from_graph(
        cls,
        F: Tensor,
        g: DirectedGraph,
        dual: Optional[DualGraph] = None,
        edge: Optional[Tensor] = None,
    ) -> "DualFeatures":
        src, dst = dual_endpoints(g, dual)
        if edge is not None and edge.rows != src.shape[0]:
            raise ShapeMismatch(f"edge features have {edge.rows} rows for {src.shape[0]} arcs")
        return cls(F, src, dst, edge)

    @property
    def rows(self) -> int:
        return int(self.src.shape[0])

    @property
    def edge_width(self) -> int:
        return 0 if self.edge is None else self.edge.cols

    @property
    def width(self) -> int:
        return self.edge_width + 2 * self.vertex.cols

    def project(self, W: Tensor) -> Tensor:
        """This matrix times W, computed as gathers of the vertex projections."""
        if W.rows != self.width:
            raise ShapeMismatch(f"dual weights have {W.rows} rows, features are {self.width} wide")
        e, q = self.edge_width, self.vertex.cols
        top = ops.matmul(self.vertex, ops.row_slice(W, e, e + q))
        bottom = ops.matmul(self.vertex, ops.row_slice(W, e + q, e + 2 * q))
        out = ops.add(ops.gather_rows(top, self.src), ops.gather_rows(bottom, self.dst))
        if self.edge is not None:
            out = ops.add(ops.matmul(self.edge, ops.row_slice(W, 0, e)), out)
        return out

    def materialize(self) -> Tensor:
        pair = ops.concat_cols(
            ops.gather_rows(self.vertex, self.src), ops.gather_rows(self.vertex, self.dst)
        )
        return pair if self.edge is None else ops.concat_cols(self.edge, pair)


def dual_features_init(F: Tensor, g: DirectedGraph) -> Tensor:
    """Row for arc (i, j) is [f_i, f_j]."""
    return DualFeatures.from_graph(F, g).materialize()


def _warn_isolated(dual: DualGraph) -> None:
    if dual in _warned:
        return
    _warned.add(dual)
    isolated = int(np.count_nonzero(dual.degree() == 0))
    if isolated:
        log.warning("empty_dual_neighborhood", dual_vertices=isolated, mode=dual.mode.value)


def dual_conv_forward(
    F_dual: Union[Tensor, DualFeatures],
    dual: DualGraph,
    params: DualConvParams,
    tape: Tape,
    dropout: Optional[Dropout] = None,
    identity_attention: bool = False,
) -> Tensor:
    """Attention over every dual neighbor, one softmax per dual vertex.

    A dual vertex without neighbors gets activation(0). With
    ``identity_attention`` each dual vertex attends only to itself with
    weight 1, which turns the layer into activation(F~ W~).

    Raises:
        ShapeMismatch: If the features are not indexed by the dual's vertices.
    """
    if F_dual.rows != dual.n:
        raise ShapeMismatch(f"dual features have {F_dual.rows} rows for {dual.n} dual vertices")
    nb = dual.neighborhoods()
    if not identity_attention:
        _warn_isolated(dual)

    heads = []
    for W, a in zip(params.W, params.a):
        Wt = tape.watch(W)
        if isinstance(F_dual, DualFeatures):
            projected = F_dual.project(Wt)
        else:
            projected = ops.matmul(F_dual, Wt)
        if identity_attention:
            heads.append(projected)
            continue
        logits = attention_logits(projected, tape.watch(a), nb.receivers, nb.senders)
        alpha = drop(dropout, ops.segment_softmax(logits, nb.receivers, nb.count))
        heads.append(attend(projected, alpha, nb, nb.senders))

    return activate(params.activation, merge_heads(heads, "concat"))


def dual_gat_forward(
    E: Union[Tensor, DualFeatures],
    dual: DualGraph,
    params: DualConvParams,
    tape: Tape,
    dropout: Optional[Dropout] = None,
) -> Tensor:
    """Dual-only attention layer updating edge features (no primal step)."""
    if isinstance(E, DualFeatures):
        edge = None if E.edge is None else drop(dropout, E.edge)
        E = DualFeatures(drop(dropout, E.vertex), E.src, E.dst, edge)
    else:
        E = drop(dropout, E)
    return dual_conv_forward(E, dual, params, tape, dropout)
