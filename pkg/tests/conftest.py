"""Shared pytest fixtures for dpgcnn tests."""

import os
from pathlib import Path

import pytest

from dpgcnn.datasets.synthetic import planted_direction, two_cluster
from dpgcnn.graph.primal import DirectedGraph, from_edge_list, to_bidirected

DATA_DIR_ENV = "DPGCNN_DATA_DIR"


@pytest.fixture
def triangle() -> DirectedGraph:
    """Undirected triangle as a bidirected graph (6 arcs)."""
    return to_bidirected(from_edge_list([(0, 1), (1, 2), (2, 0)], 3))


@pytest.fixture
def directed_cycle() -> DirectedGraph:
    """Directed 3-cycle 0 -> 1 -> 2 -> 0."""
    return from_edge_list([(0, 1), (1, 2), (2, 0)], 3)


@pytest.fixture
def bidirected_path() -> DirectedGraph:
    """Path 0 - 1 - 2 with both orientations of each edge."""
    return to_bidirected(from_edge_list([(0, 1), (1, 2)], 3))


@pytest.fixture
def cluster_data():
    """40-vertex two-class dataset, separable by construction."""
    return two_cluster(n=40, q=8, seed=0)


@pytest.fixture
def planted_data():
    """Digraph whose arcs point from higher to lower feature 0."""
    return planted_direction(n=40, q=8, seed=0)


@pytest.fixture
def citation_files(tmp_path: Path) -> dict:
    """A tiny content/cites pair in the citation dataset layout.

    Six papers in two classes; one cites line references an unknown id,
    one is a self citation and one is repeated.
    """
    content = tmp_path / "tiny.content"
    rows = [
        ("p1", [1, 0, 0, 1], "ml"),
        ("p2", [1, 1, 0, 0], "ml"),
        ("p3", [0, 1, 0, 0], "ml"),
        ("p4", [0, 0, 1, 1], "db"),
        ("p5", [0, 0, 1, 0], "db"),
        ("p6", [0, 1, 1, 1], "db"),
    ]
    content.write_text(
        "".join(f"{pid}\t" + "\t".join(map(str, f)) + f"\t{label}\n" for pid, f, label in rows),
        encoding="utf-8",
    )
    cites = tmp_path / "tiny.cites"
    # cited <TAB> citing
    lines = [
        ("p1", "p2"),
        ("p2", "p3"),
        ("p1", "p3"),
        ("p4", "p5"),
        ("p5", "p6"),
        ("p4", "p6"),
        ("p3", "p4"),
        ("p1", "p2"),
        ("p6", "p6"),
        ("p9", "p1"),
    ]
    cites.write_text("".join(f"{a}\t{b}\n" for a, b in lines), encoding="utf-8")
    return {"content": content, "cites": cites, "dir": tmp_path}


@pytest.fixture
def data_dir() -> Path:
    """Dataset root for the desk-scale reproductions; skips when absent."""
    root = os.environ.get(DATA_DIR_ENV)
    if not root or not (Path(root) / "cora" / "cora.content").exists():
        pytest.skip(f"citation datasets not found under ${DATA_DIR_ENV}")
    return Path(root)
