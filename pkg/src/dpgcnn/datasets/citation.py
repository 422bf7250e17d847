"""Citation-network files: content table (features + labels) and cites list."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np
from numpy.typing import NDArray

from dpgcnn.errors import InconsistentWidth, MalformedLine
from dpgcnn.graph.primal import DirectedGraph, from_edge_list, to_bidirected
from dpgcnn.utils.logging import get_logger

log = get_logger(__name__)

Array = NDArray[np.float64]
IntArray = NDArray[np.int64]


@dataclass
class ContentTable:
    """Vertex ids, n x q features and class labels.

    Class names are indexed in sorted order.
    """

    ids: List[str]
    features: Array
    labels: IntArray
    classes: List[str]
    index: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.index:
            self.index = {vid: i for i, vid in enumerate(self.ids)}

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def q(self) -> int:
        return int(self.features.shape[1])

    @property
    def num_classes(self) -> int:
        return len(self.classes)


def _parse_features(path: Path, line_no: int, tokens: List[str]) -> List[float]:
    try:
        return [float(t) for t in tokens]
    except ValueError as e:
        raise MalformedLine(str(path), line_no, f"non-numeric feature: {e}") from e


def load_content(path: Union[str, Path]) -> ContentTable:
    """Parse ``id<TAB>w_1 .. w_q<TAB>label`` lines.

    Raises:
        FileNotFoundError: If the file is missing.
        MalformedLine: On a short line, a bad feature or a repeated id.
        InconsistentWidth: If rows disagree on q.
    """
    path = Path(path)
    ids: List[str] = []
    rows: List[List[float]] = []
    names: List[str] = []
    seen: Dict[str, int] = {}
    width = None
    with open(path, encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) < 3:
                raise MalformedLine(str(path), line_no, "expected id, features and label")
            vid, label = parts[0], parts[-1]
            if vid in seen:
                raise MalformedLine(str(path), line_no, f"duplicate id {vid!r}")
            values = _parse_features(path, line_no, parts[1:-1])
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise InconsistentWidth(
                    f"{path}:{line_no}: {len(values)} features, earlier rows have {width}"
                )
            seen[vid] = len(ids)
            ids.append(vid)
            rows.append(values)
            names.append(label)

    classes = sorted(set(names))
    class_index = {c: i for i, c in enumerate(classes)}
    features = np.array(rows, dtype=np.float64).reshape(len(ids), width or 0)
    labels = np.array([class_index[c] for c in names], dtype=np.int64)
    table = ContentTable(ids, features, labels, classes, seen)
    log.info(
        "content_loaded",
        path=str(path),
        vertices=table.n,
        features=table.q,
        classes=table.num_classes,
    )
    return table


def _format_value(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def save_content(table: ContentTable, path: Union[str, Path]) -> None:
    """Write ``table`` in the layout load_content reads."""
    with open(path, "w", encoding="utf-8") as f:
        for vid, row, label in zip(table.ids, table.features, table.labels):
            values = "\t".join(_format_value(v) for v in row)
            f.write(f"{vid}\t{values}\t{table.classes[int(label)]}\n")


def row_normalize(features: Array) -> Array:
    """Divide each nonzero row by its L1 norm."""
    norms = np.abs(features).sum(axis=1, keepdims=True)
    return features / np.where(norms > 0, norms, 1.0)


@dataclass(frozen=True)
class CitesStats:
    lines: int
    arcs: int
    skipped_unknown: int
    self_citations: int
    duplicates: int

    def to_dict(self) -> Dict[str, int]:
        return {
            "lines": self.lines,
            "arcs": self.arcs,
            "skipped_unknown": self.skipped_unknown,
            "self_citations": self.self_citations,
            "duplicates": self.duplicates,
        }


def read_cites(path: Union[str, Path], content: ContentTable) -> Tuple[DirectedGraph, CitesStats]:
    """Parse ``cited<TAB>citing`` lines into arcs citing -> cited.

    Ids missing from ``content`` and self-citations are dropped and counted.

    Raises:
        FileNotFoundError: If the file is missing.
        MalformedLine: On a line without exactly two fields.
    """
    path = Path(path)
    pairs: List[Tuple[int, int]] = []
    lines = unknown = loops = 0
    with open(path, encoding="utf-8") as f:
        for line_no, raw in enumerate(f, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise MalformedLine(str(path), line_no, "expected 'cited<TAB>citing'")
            lines += 1
            cited, citing = parts[0].strip(), parts[1].strip()
            if cited not in content.index or citing not in content.index:
                unknown += 1
                continue
            if cited == citing:
                loops += 1
                continue
            pairs.append((content.index[citing], content.index[cited]))

    graph = from_edge_list(pairs, content.n, dedupe=True)
    stats = CitesStats(
        lines=lines,
        arcs=graph.num_arcs,
        skipped_unknown=unknown,
        self_citations=loops,
        duplicates=len(pairs) - graph.num_arcs,
    )
    log.info("cites_loaded", path=str(path), **stats.to_dict())
    return graph, stats


def load_cites(
    path: Union[str, Path], content: ContentTable, bidirect: bool = True
) -> DirectedGraph:
    """Citation graph; bidirected for vertex classification."""
    graph, _ = read_cites(path, content)
    return to_bidirected(graph) if bidirect else graph
