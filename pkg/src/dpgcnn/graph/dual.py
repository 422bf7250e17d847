"""Dual (line-digraph) construction, edge-count report and sparsification.

A dual vertex stands for a primal arc. Adjacency modes:

chain
    (i, j) is adjacent to every arc entering i and every arc leaving j.
fan
    (i, j) is adjacent to every other arc leaving i and every other arc
    entering j.
classic_line_graph
    one dual vertex per undirected edge; two are adjacent iff the edges
    share an endpoint. The primal must be bidirected and loop-free.

Work for chain mode is sum over arcs (i, j) of d_in(i) + d_out(j); the
candidate count is kept on the result as ``construction_ops``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, Optional, Union

import numpy as np
from numpy.typing import NDArray

from dpgcnn.autodiff.rng import Rng
from dpgcnn.errors import ModeRequiresUndirected, PreconditionError
from dpgcnn.graph.primal import DirectedGraph, IntArray, Neighborhoods, _frozen, _offsets
from dpgcnn.utils.logging import get_logger

log = get_logger(__name__)


class DualMode(str, Enum):
    """Dual adjacency rules."""

    CHAIN = "chain"
    FAN = "fan"
    CLASSIC = "classic_line_graph"


def _ranges(starts: np.ndarray, counts: np.ndarray) -> IntArray:
    """Concatenation of arange(s, s + c) for every (s, c)."""
    counts = counts.astype(np.int64)
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    ends = np.cumsum(counts)
    shift = np.repeat(starts.astype(np.int64) - (ends - counts), counts)
    return np.arange(total, dtype=np.int64) + shift


@dataclass(frozen=True, eq=False)
class DualGraph:
    """Arc-indexed undirected dual graph in CSR form."""

    primal: DirectedGraph
    n: int
    dual_offsets: IntArray
    dual_targets: IntArray
    mode: DualMode
    reverse_arc: IntArray
    arc_to_dual: IntArray
    dual_to_arc: IntArray
    construction_ops: int = 0
    sparsified_k: Optional[int] = None

    @property
    def num_edges(self) -> int:
        return int(self.dual_targets.shape[0]) // 2

    def degree(self) -> IntArray:
        return np.diff(self.dual_offsets)

    def rows(self) -> IntArray:
        return np.repeat(np.arange(self.n, dtype=np.int64), self.degree())

    def neighbors(self, u: int) -> IntArray:
        return self.dual_targets[self.dual_offsets[u] : self.dual_offsets[u + 1]]

    def neighborhoods(self) -> Neighborhoods:
        """Dual vertex u attends over its dual neighbors."""
        return Neighborhoods(
            receivers=self.rows(),
            senders=self.dual_targets,
            edge_ids=np.arange(self.dual_targets.shape[0], dtype=np.int64),
            count=self.n,
        )

    def edge_pairs(self) -> NDArray[np.int64]:
        """Each undirected dual edge once, as (u, v) with u < v."""
        rows = self.rows()
        keep = rows < self.dual_targets
        return np.stack([rows[keep], self.dual_targets[keep]], axis=1)

    def __repr__(self) -> str:
        return (
            f"DualGraph(mode={self.mode.value}, vertices={self.n}, edges={self.num_edges}, "
            f"sparsified_k={self.sparsified_k})"
        )


def _csr_from_pairs(a: np.ndarray, b: np.ndarray, n: int) -> tuple:
    """Symmetrise, dedupe and drop self-pairs; return CSR offsets and targets."""
    rows = np.concatenate([a, b])
    cols = np.concatenate([b, a])
    keep = rows != cols
    keys = np.unique(rows[keep] * max(n, 1) + cols[keep])
    rows, cols = keys // max(n, 1), keys % max(n, 1)
    return _frozen(_offsets(rows, n)), _frozen(cols.astype(np.int64))


def _chain_candidates(g: DirectedGraph) -> tuple:
    """(arc, candidate) pairs: arcs into src(arc) and arcs out of dst(arc)."""
    m = g.num_arcs
    arc_ids = np.arange(m, dtype=np.int64)
    in_deg = g.in_degree()
    out_deg = g.out_degree()

    into_src_counts = in_deg[g.src]
    into_src = g.in_arcs[_ranges(g.in_offsets[g.src], into_src_counts)]
    out_dst_counts = out_deg[g.dst]
    out_of_dst = _ranges(g.out_offsets[g.dst], out_dst_counts)

    owners = np.concatenate(
        [np.repeat(arc_ids, into_src_counts), np.repeat(arc_ids, out_dst_counts)]
    )
    return owners, np.concatenate([into_src, out_of_dst])


def _fan_candidates(g: DirectedGraph) -> tuple:
    """(arc, candidate) pairs: arcs out of src(arc) and arcs into dst(arc)."""
    m = g.num_arcs
    arc_ids = np.arange(m, dtype=np.int64)
    in_deg = g.in_degree()
    out_deg = g.out_degree()

    out_src_counts = out_deg[g.src]
    out_of_src = _ranges(g.out_offsets[g.src], out_src_counts)
    into_dst_counts = in_deg[g.dst]
    into_dst = g.in_arcs[_ranges(g.in_offsets[g.dst], into_dst_counts)]

    owners = np.concatenate(
        [np.repeat(arc_ids, out_src_counts), np.repeat(arc_ids, into_dst_counts)]
    )
    return owners, np.concatenate([out_of_src, into_dst])


def _classic_candidates(g: DirectedGraph) -> tuple:
    """Undirected edge ids and (edge, edge) pairs sharing an endpoint."""
    forward = np.flatnonzero(g.src < g.dst)
    edge_of_arc = np.full(g.num_arcs, -1, dtype=np.int64)
    edge_of_arc[forward] = np.arange(forward.shape[0], dtype=np.int64)
    reverse = g.reverse_arcs()
    backward = np.flatnonzero(g.src > g.dst)
    edge_of_arc[backward] = edge_of_arc[reverse[backward]]

    # incidences sorted by vertex: (vertex, edge) for both endpoints
    inc_vertex = np.concatenate([g.src[forward], g.dst[forward]])
    inc_edge = np.concatenate([np.arange(forward.shape[0])] * 2).astype(np.int64)
    order = np.lexsort((inc_edge, inc_vertex))
    inc_vertex, inc_edge = inc_vertex[order], inc_edge[order]
    inc_offsets = _offsets(inc_vertex, g.n)
    per_vertex = np.diff(inc_offsets)

    partners = _ranges(inc_offsets[inc_vertex], per_vertex[inc_vertex])
    owners = np.repeat(inc_edge, per_vertex[inc_vertex])
    return forward, edge_of_arc, owners, inc_edge[partners]


def build_dual(g: DirectedGraph, mode: Union[DualMode, str] = DualMode.CHAIN) -> DualGraph:
    """Construct the dual of ``g``.

    Raises:
        ModeRequiresUndirected: classic mode on a non-bidirected or looped graph.
    """
    mode = DualMode(mode)
    reverse = g.reverse_arcs()

    if mode is DualMode.CLASSIC:
        if not g.is_bidirected or g.has_self_loops:
            raise ModeRequiresUndirected(
                "classic_line_graph needs a bidirected primal without self-loops"
            )
        forward, edge_of_arc, owners, partners = _classic_candidates(g)
        n = int(forward.shape[0])
        offsets, targets = _csr_from_pairs(owners, partners, n)
        arc_to_dual, dual_to_arc = edge_of_arc, forward.astype(np.int64)
        ops = int(owners.shape[0])
    else:
        owners, partners = (_chain_candidates if mode is DualMode.CHAIN else _fan_candidates)(g)
        n = g.num_arcs
        offsets, targets = _csr_from_pairs(owners, partners, n)
        arc_to_dual = dual_to_arc = np.arange(n, dtype=np.int64)
        ops = int(owners.shape[0])

    dual = DualGraph(
        primal=g,
        n=n,
        dual_offsets=offsets,
        dual_targets=targets,
        mode=mode,
        reverse_arc=_frozen(reverse),
        arc_to_dual=_frozen(np.asarray(arc_to_dual)),
        dual_to_arc=_frozen(np.asarray(dual_to_arc)),
        construction_ops=ops,
    )
    log.debug(
        "dual_built",
        mode=mode.value,
        dual_vertices=dual.n,
        dual_edges=dual.num_edges,
        construction_ops=ops,
    )
    return dual


@dataclass(frozen=True)
class DualEdgeCountReport:
    """Direct dual edge tally next to the closed-form count."""

    n: int
    primal_edge_count: int
    dual_vertex_count: int
    dual_edge_count_actual: int
    dual_edge_count_formula: int
    formulas_agree: bool
    formula: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "primal_edge_count": self.primal_edge_count,
            "dual_vertex_count": self.dual_vertex_count,
            "dual_edge_count_actual": self.dual_edge_count_actual,
            "dual_edge_count_formula": self.dual_edge_count_formula,
            "formulas_agree": self.formulas_agree,
            "formula": self.formula,
        }


def count_report(d: DualGraph) -> DualEdgeCountReport:
    """Compare the dual's edge count with the closed-form expression.

    classic mode uses half the sum of squared undirected degrees minus the
    undirected edge count; chain and fan use the sum of in-degree times
    out-degree minus the arc count. Only the classic expression is exact
    for the construction implemented here.
    """
    g = d.primal
    actual = int(d.dual_targets.shape[0]) // 2
    if d.mode is DualMode.CLASSIC:
        edges = int(d.n)
        degree = np.bincount(g.src, minlength=g.n).astype(np.int64)
        formula = int((degree * degree).sum() // 2 - edges)
        expression = "sum(d_i^2)/2 - |E|"
    else:
        edges = g.num_arcs
        formula = int((g.in_degree() * g.out_degree()).sum() - edges)
        expression = "sum(d_in_i * d_out_i) - |E|"
    return DualEdgeCountReport(
        n=g.n,
        primal_edge_count=edges,
        dual_vertex_count=d.n,
        dual_edge_count_actual=actual,
        dual_edge_count_formula=formula,
        formulas_agree=actual == formula,
        formula=expression,
    )


def sparsification_keys(d: DualGraph, seed: int) -> NDArray[np.float64]:
    """The uniform draws sparsify_dual ranks neighbors by (one per CSR entry)."""
    return Rng(seed).spawn("sparsifier").uniform(int(d.dual_targets.shape[0]))


def sparsify_dual(d: DualGraph, k: int, seed: int) -> DualGraph:
    """Keep at most ``k`` uniformly sampled neighbors per dual vertex.

    An edge survives if either endpoint sampled it, so the result stays
    symmetric. The output is a plain DualGraph meant to be built once and
    reused for every epoch.
    """
    if k < 1:
        raise PreconditionError(f"k must be >= 1, got {k}")
    degree = d.degree()
    if d.n == 0 or int(degree.max(initial=0)) <= k:
        return d

    rows = d.rows()
    keys = sparsification_keys(d, seed)
    order = np.lexsort((keys, rows))
    rank = np.empty_like(order)
    rank[order] = np.arange(order.shape[0]) - np.repeat(d.dual_offsets[:-1], degree)
    keep = rank < k

    offsets, targets = _csr_from_pairs(rows[keep], d.dual_targets[keep], d.n)
    out = DualGraph(
        primal=d.primal,
        n=d.n,
        dual_offsets=offsets,
        dual_targets=targets,
        mode=d.mode,
        reverse_arc=d.reverse_arc,
        arc_to_dual=d.arc_to_dual,
        dual_to_arc=d.dual_to_arc,
        construction_ops=d.construction_ops,
        sparsified_k=k,
    )
    log.info("dual_sparsified", k=k, edges_before=d.num_edges, edges_after=out.num_edges)
    return out
