"""Citation datasets, splits, link tasks and synthetic generators."""

from dpgcnn.datasets.base import DigraphDataset, VertexDataset
from dpgcnn.datasets.citation import (
    CitesStats,
    ContentTable,
    load_cites,
    load_content,
    read_cites,
    row_normalize,
    save_content,
)
from dpgcnn.datasets.link import LinkTask, make_link_task
from dpgcnn.datasets.splits import Split, SplitSpec, load_split_json, make_split, save_split_json

__all__ = [
    "CitesStats",
    "ContentTable",
    "DigraphDataset",
    "LinkTask",
    "Split",
    "SplitSpec",
    "VertexDataset",
    "load_cites",
    "load_content",
    "load_split_json",
    "make_link_task",
    "make_split",
    "read_cites",
    "row_normalize",
    "save_content",
    "save_split_json",
]
