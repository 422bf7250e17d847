"""Seeded random graphs and small learnable tasks."""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

from dpgcnn.autodiff.rng import Rng
from dpgcnn.datasets.base import DigraphDataset, VertexDataset
from dpgcnn.errors import PreconditionError
from dpgcnn.graph.primal import DirectedGraph, from_edge_list, to_bidirected

_MAX_ROUNDS = 64


def _distinct_pairs(rng: Rng, n: int, m: int, undirected: bool) -> NDArray[np.int64]:
    """``m`` distinct non-loop pairs in draw order (i < j when undirected)."""
    capacity = n * (n - 1) // (2 if undirected else 1)
    if m > capacity:
        raise PreconditionError(f"{m} distinct pairs requested, only {capacity} exist")
    found = np.zeros((0, 2), dtype=np.int64)
    for _ in range(_MAX_ROUNDS):
        if found.shape[0] >= m:
            break
        draws = np.floor(rng.uniform((2 * m + 16, 2)) * n).astype(np.int64)
        draws = draws[draws[:, 0] != draws[:, 1]]
        if undirected:
            draws = np.sort(draws, axis=1)
        merged = np.concatenate([found, draws])
        _, first = np.unique(merged[:, 0] * n + merged[:, 1], return_index=True)
        found = merged[np.sort(first)]
    if found.shape[0] < m:
        raise PreconditionError(f"could not draw {m} distinct pairs on {n} vertices")
    return found[:m]


def random_digraph(n: int, m: int, seed: int) -> DirectedGraph:
    """``m`` distinct arcs without self-loops; reciprocal pairs may occur."""
    return from_edge_list(_distinct_pairs(Rng(seed).spawn("digraph"), n, m, False), n)


def random_undirected(n: int, m: int, seed: int) -> DirectedGraph:
    """Bidirected graph with ``m`` undirected edges (possibly disconnected)."""
    pairs = _distinct_pairs(Rng(seed).spawn("undirected"), n, m, True)
    return to_bidirected(from_edge_list(pairs, n))


def random_connected_bidirected(n: int, extra: int, seed: int) -> DirectedGraph:
    """Random recursive tree plus up to ``extra`` further edges, bidirected."""
    rng = Rng(seed)
    child = np.arange(1, n, dtype=np.int64)
    parent = np.floor(rng.spawn("tree").uniform(n - 1) * child).astype(np.int64)
    pairs = [np.stack([parent, child], axis=1)]
    extra = min(extra, n * (n - 1) // 2 - (n - 1))
    if extra > 0:
        pairs.append(_distinct_pairs(rng.spawn("extra"), n, extra, True))
    return to_bidirected(from_edge_list(np.concatenate(pairs), n))


def two_cluster(n: int = 40, q: int = 8, seed: int = 0, degree: int = 3) -> VertexDataset:
    """Two classes, each a ring with random chords, features shifted by class.

    Class 0 owns the first half of the vertices and has +1 on the first
    half of the features; class 1 the rest. One edge joins the clusters.
    """
    if n < 4 or q < 2:
        raise PreconditionError("two_cluster needs n >= 4 and q >= 2")
    rng = Rng(seed)
    half = n // 2
    labels = (np.arange(n) >= half).astype(np.int64)
    features = 0.5 * rng.spawn("features").uniform((n, q))
    features[labels == 0, : q // 2] += 1.0
    features[labels == 1, q // 2 :] += 1.0

    pairs = []
    chords = rng.spawn("chords")
    for lo, hi in ((0, half), (half, n)):
        size = hi - lo
        ring = np.arange(lo, hi, dtype=np.int64)
        pairs.append(np.stack([ring, np.roll(ring, -1)], axis=1))
        src = np.repeat(ring, degree)
        dst = lo + np.floor(chords.uniform(size * degree) * size).astype(np.int64)
        pairs.append(np.stack([src, dst], axis=1))
    pairs.append(np.array([[0, half]], dtype=np.int64))
    arcs = np.concatenate(pairs)
    arcs = arcs[arcs[:, 0] != arcs[:, 1]]
    graph = to_bidirected(from_edge_list(arcs, n))
    return VertexDataset("two_cluster", features, labels, graph, ["a", "b"])


def _cycle_pairs(rng: Rng, n: int, m: int) -> NDArray[np.int64]:
    """First ``m`` distinct edges (i < j) of a sequence of random Hamiltonian cycles."""
    found = np.zeros((0, 2), dtype=np.int64)
    for r in range(_MAX_ROUNDS):
        if found.shape[0] >= m:
            break
        order = rng.spawn(str(r)).permutation(n).astype(np.int64)
        ring = np.sort(np.stack([order, np.roll(order, -1)], axis=1), axis=1)
        merged = np.concatenate([found, ring])
        _, first = np.unique(merged[:, 0] * n + merged[:, 1], return_index=True)
        found = merged[np.sort(first)]
    if found.shape[0] < m:
        raise PreconditionError(f"could not draw {m} distinct cycle edges on {n} vertices")
    return found[:m]


def planted_direction(n: int = 40, q: int = 8, seed: int = 0, degree: int = 4) -> DigraphDataset:
    """Random digraph whose arcs point from higher to lower feature 0.

    The undirected skeleton has ``degree * n`` edges taken from ``degree``
    random Hamiltonian cycles (topped up from one more where two cycles
    share an edge), so almost every vertex has ``2 * degree`` neighbors.
    """
    if n < 3:
        raise PreconditionError("planted_direction needs n >= 3")
    rng = Rng(seed)
    features = rng.spawn("features").uniform((n, q))
    m = min(degree * n, n * (n - 1) // 2)
    pairs = _cycle_pairs(rng.spawn("cycles"), n, m)
    hi_first = features[pairs[:, 0], 0] >= features[pairs[:, 1], 0]
    arcs = np.where(hi_first[:, None], pairs, pairs[:, ::-1])
    return DigraphDataset("planted_direction", features, from_edge_list(arcs, n))
