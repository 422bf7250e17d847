"""Edge-list TSV reading and writing."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Tuple, Union

from dpgcnn.errors import MalformedLine
from dpgcnn.graph.primal import DirectedGraph, from_edge_list
from dpgcnn.utils.logging import get_logger

log = get_logger(__name__)


@dataclass
class EdgeList:
    """A parsed edge-list file.

    ``labels[i]`` is the original token of vertex i. When every token in
    the file is a non-negative decimal integer the ids are used as-is and
    ``mapped`` is False; otherwise all tokens are opaque strings numbered
    in first-seen order.
    """

    pairs: List[Tuple[int, int]]
    labels: List[str]
    mapped: bool
    duplicates: int = 0
    source: str = ""
    id_map: Dict[str, int] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.labels)

    def graph(self) -> DirectedGraph:
        return from_edge_list(self.pairs, self.n, dedupe=True)


def _tokens(path: Path) -> List[Tuple[int, str, str]]:
    rows = []
    with open(path, encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise MalformedLine(str(path), line_no, "expected 'src<TAB>dst'")
            rows.append((line_no, parts[0].strip(), parts[1].strip()))
    return rows


def _is_index(token: str) -> bool:
    return token.isascii() and token.isdigit()


def read_edge_list(path: Union[str, Path]) -> EdgeList:
    """Parse a ``src<TAB>dst`` file.

    Raises:
        FileNotFoundError: If the file is missing.
        MalformedLine: On a line without exactly two tab-separated fields.
    """
    path = Path(path)
    rows = _tokens(path)
    numeric = all(_is_index(a) and _is_index(b) for _, a, b in rows)

    if numeric:
        pairs = [(int(a), int(b)) for _, a, b in rows]
        n = 1 + max((max(p) for p in pairs), default=-1)
        labels = [str(i) for i in range(n)]
        id_map: Dict[str, int] = {}
    else:
        id_map = {}
        pairs = []
        for _, a, b in rows:
            for token in (a, b):
                if token not in id_map:
                    id_map[token] = len(id_map)
            pairs.append((id_map[a], id_map[b]))
        labels = list(id_map)

    duplicates = len(pairs) - len(set(pairs))
    log.info(
        "graph_loaded",
        path=str(path),
        vertices=len(labels),
        arcs=len(pairs) - duplicates,
        duplicates=duplicates,
        mapped_ids=not numeric,
    )
    return EdgeList(pairs, labels, not numeric, duplicates, str(path), id_map)


def write_edge_list(pairs: Iterable[Tuple[object, object]], path: Union[str, Path]) -> int:
    """Write pairs as ``src<TAB>dst`` lines; returns the number written."""
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for a, b in pairs:
            f.write(f"{a}\t{b}\n")
            count += 1
    return count


def write_id_map(id_map: Dict[str, int], path: Union[str, Path]) -> None:
    """Sidecar JSON table from original token to dense vertex id."""
    with open(path, "w", encoding="utf-8") as f:
        json.dump(id_map, f, indent=2)


def read_id_map(path: Union[str, Path]) -> Dict[str, int]:
    with open(path, encoding="utf-8") as f:
        return {str(k): int(v) for k, v in json.load(f).items()}
