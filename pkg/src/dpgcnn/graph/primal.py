"""Primal graph: sorted arc list with out- and in-CSR views."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import NDArray
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from dpgcnn.errors import DuplicateArc, IndexOutOfRange
from dpgcnn.utils.logging import get_logger

log = get_logger(__name__)

IntArray = NDArray[np.int64]


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _offsets(keys: np.ndarray, n: int) -> IntArray:
    """CSR offsets for keys already sorted ascending."""
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(keys, minlength=n), out=offsets[1:])
    return offsets


@dataclass(frozen=True)
class Neighborhoods:
    """Flat per-edge arrays an attention layer aggregates over.

    Row k says: ``receivers[k]`` attends to ``senders[k]`` through edge
    ``edge_ids[k]``. ``count`` is the number of receivers.
    """

    receivers: IntArray
    senders: IntArray
    edge_ids: IntArray
    count: int

    @property
    def size(self) -> int:
        return int(self.receivers.shape[0])

    def degrees(self) -> IntArray:
        return np.bincount(self.receivers, minlength=self.count)


@dataclass(frozen=True, eq=False)
class DirectedGraph:
    """Immutable directed graph on vertices 0..n-1.

    Arcs are sorted lexicographically by (src, dst); an arc's id is its
    position in that order. ``out_offsets`` indexes arc ids directly (arcs
    leaving a vertex are contiguous); ``in_offsets`` indexes ``in_sources``
    and ``in_arcs`` (ids of the arcs entering each vertex, ordered by src).
    """

    n: int
    src: IntArray
    dst: IntArray
    out_offsets: IntArray
    in_offsets: IntArray
    in_sources: IntArray
    in_arcs: IntArray
    is_bidirected: bool
    has_self_loops: bool

    # -- construction -------------------------------------------------------

    @classmethod
    def _from_sorted(cls, src: np.ndarray, dst: np.ndarray, n: int) -> "DirectedGraph":
        src = np.ascontiguousarray(src, dtype=np.int64)
        dst = np.ascontiguousarray(dst, dtype=np.int64)
        in_arcs = np.lexsort((src, dst)).astype(np.int64)
        bidirected = True
        if src.shape[0]:
            graph_keys = src * max(n, 1) + dst
            rev_keys = dst * max(n, 1) + src
            pos = np.minimum(np.searchsorted(graph_keys, rev_keys), graph_keys.shape[0] - 1)
            bidirected = bool(np.all(graph_keys[pos] == rev_keys))
        return cls(
            n=n,
            src=_frozen(src),
            dst=_frozen(dst),
            out_offsets=_frozen(_offsets(src, n)),
            in_offsets=_frozen(_offsets(dst[in_arcs], n)),
            in_sources=_frozen(src[in_arcs]),
            in_arcs=_frozen(in_arcs),
            is_bidirected=bidirected,
            has_self_loops=bool(np.any(src == dst)),
        )

    # -- basic views ----------------------------------------------------------

    @property
    def num_arcs(self) -> int:
        return int(self.src.shape[0])

    @property
    def arcs(self) -> NDArray[np.int64]:
        """(num_arcs, 2) array of (src, dst)."""
        return np.stack([self.src, self.dst], axis=1)

    @property
    def out_targets(self) -> IntArray:
        return self.dst

    def out_degree(self) -> IntArray:
        return np.diff(self.out_offsets)

    def in_degree(self) -> IntArray:
        return np.diff(self.in_offsets)

    def undirected_edge_count(self) -> int:
        """Number of distinct unordered pairs {i, j} (self-loops count once)."""
        lo = np.minimum(self.src, self.dst)
        hi = np.maximum(self.src, self.dst)
        return int(np.unique(lo * max(self.n, 1) + hi).shape[0])

    def arc_index(self, src: Union[int, np.ndarray], dst: Union[int, np.ndarray]) -> np.ndarray:
        """Arc id of (src, dst), or -1 where the arc is absent."""
        n = max(self.n, 1)
        keys = self.src * n + self.dst
        query = np.asarray(src, dtype=np.int64) * n + np.asarray(dst, dtype=np.int64)
        if keys.shape[0] == 0:
            return np.full(query.shape, -1, dtype=np.int64)
        pos = np.minimum(np.searchsorted(keys, query), keys.shape[0] - 1)
        return np.where(keys[pos] == query, pos, -1).astype(np.int64)

    def reverse_arcs(self) -> IntArray:
        """For every arc (i, j), the id of (j, i) or -1."""
        return self.arc_index(self.dst, self.src)

    def neighborhoods(self) -> Neighborhoods:
        """Vertex i attends over its incoming arcs (j, i)."""
        return Neighborhoods(
            receivers=self.dst,
            senders=self.src,
            edge_ids=np.arange(self.num_arcs, dtype=np.int64),
            count=self.n,
        )

    def pairs(self) -> Iterable[Tuple[int, int]]:
        return zip(self.src.tolist(), self.dst.tolist())

    def __repr__(self) -> str:
        return (
            f"DirectedGraph(n={self.n}, arcs={self.num_arcs}, "
            f"bidirected={self.is_bidirected}, self_loops={self.has_self_loops})"
        )


def from_edge_list(
    pairs: Union[Sequence[Tuple[int, int]], np.ndarray],
    n: int,
    dedupe: bool = True,
) -> DirectedGraph:
    """Build a DirectedGraph from (src, dst) pairs.

    Args:
        pairs: Arc list in any order.
        n: Vertex count.
        dedupe: Merge repeated arcs; when False a repeat raises DuplicateArc.

    Raises:
        IndexOutOfRange: If an endpoint is negative or >= n.
        DuplicateArc: If dedupe is False and an arc repeats.
    """
    arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if arr.size and (arr.min() < 0 or arr.max() >= n):
        bad = arr[(arr < 0).any(axis=1) | (arr >= n).any(axis=1)][0]
        raise IndexOutOfRange(f"arc ({bad[0]}, {bad[1]}) outside vertex range 0..{n - 1}")

    keys = arr[:, 0] * max(n, 1) + arr[:, 1]
    unique_keys = np.unique(keys)
    if unique_keys.shape[0] != keys.shape[0] and not dedupe:
        values, counts = np.unique(keys, return_counts=True)
        dup = int(values[counts > 1][0])
        raise DuplicateArc(f"arc ({dup // n}, {dup % n}) appears more than once")

    return DirectedGraph._from_sorted(unique_keys // max(n, 1), unique_keys % max(n, 1), n)


def to_bidirected(g: DirectedGraph) -> DirectedGraph:
    """Add the reverse of every arc."""
    if g.is_bidirected:
        return g
    src = np.concatenate([g.src, g.dst])
    dst = np.concatenate([g.dst, g.src])
    return from_edge_list(np.stack([src, dst], axis=1), g.n, dedupe=True)


def add_self_loops(g: DirectedGraph) -> DirectedGraph:
    """Ensure arc (i, i) exists for every vertex."""
    if g.n == 0:
        return g
    loops = np.arange(g.n, dtype=np.int64)
    if g.has_self_loops and np.all(g.arc_index(loops, loops) >= 0):
        return g
    src = np.concatenate([g.src, loops])
    dst = np.concatenate([g.dst, loops])
    return from_edge_list(np.stack([src, dst], axis=1), g.n, dedupe=True)


def remove_self_loops(g: DirectedGraph) -> DirectedGraph:
    if not g.has_self_loops:
        return g
    keep = g.src != g.dst
    return DirectedGraph._from_sorted(g.src[keep], g.dst[keep], g.n)


def permute(g: DirectedGraph, perm: Union[Sequence[int], np.ndarray]) -> DirectedGraph:
    """Relabel vertex i as perm[i]."""
    p = np.asarray(perm, dtype=np.int64)
    if p.shape != (g.n,) or not np.array_equal(np.sort(p), np.arange(g.n)):
        raise IndexOutOfRange("perm must be a permutation of 0..n-1")
    return from_edge_list(np.stack([p[g.src], p[g.dst]], axis=1), g.n)


def adjacency(n: int, rows: np.ndarray, cols: np.ndarray) -> coo_matrix:
    data = np.ones(rows.shape[0], dtype=np.int8)
    return coo_matrix((data, (rows, cols)), shape=(n, n))


def weak_components(n: int, rows: np.ndarray, cols: np.ndarray) -> int:
    if n == 0:
        return 0
    count, _ = connected_components(adjacency(n, rows, cols), directed=True, connection="weak")
    return int(count)


def connected(g: "Union[DirectedGraph, object]", sense: str = "weak") -> bool:
    """True iff the underlying undirected graph has exactly one component.

    Accepts a DirectedGraph or a DualGraph.
    """
    if sense != "weak":
        raise ValueError(f"unsupported connectivity sense {sense!r}")
    nb: Optional[Neighborhoods] = getattr(g, "neighborhoods", lambda: None)()
    if nb is None:
        raise TypeError(f"cannot test connectivity of {type(g).__name__}")
    return weak_components(nb.count, nb.receivers, nb.senders) == 1
