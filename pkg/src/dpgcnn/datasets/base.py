"""In-memory dataset bundles handed to the trainer."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np
from numpy.typing import NDArray

from dpgcnn.datasets.citation import ContentTable
from dpgcnn.graph.primal import DirectedGraph


@dataclass
class VertexDataset:
    """Features, labels and the bidirected graph of a vertex task."""

    name: str
    features: NDArray[np.float64]
    labels: NDArray[np.int64]
    graph: DirectedGraph
    classes: List[str]
    ids: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.ids:
            self.ids = [str(i) for i in range(self.features.shape[0])]

    @property
    def in_features(self) -> int:
        return int(self.features.shape[1])

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    def content(self) -> ContentTable:
        return ContentTable(self.ids, self.features, self.labels, self.classes)


@dataclass
class DigraphDataset:
    """Features and the directed graph a link task is cut from."""

    name: str
    features: NDArray[np.float64]
    graph: DirectedGraph
    ids: List[str] = field(default_factory=list)

    @property
    def in_features(self) -> int:
        return int(self.features.shape[1])
