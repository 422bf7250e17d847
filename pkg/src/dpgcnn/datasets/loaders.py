"""Build dataset bundles from a DatasetConfig."""

from __future__ import annotations

from dpgcnn.datasets.base import DigraphDataset, VertexDataset
from dpgcnn.datasets.citation import load_content, read_cites, row_normalize
from dpgcnn.datasets.splits import SplitSpec, load_split_json
from dpgcnn.datasets.synthetic import planted_direction, two_cluster
from dpgcnn.errors import ConfigError
from dpgcnn.graph.primal import to_bidirected
from dpgcnn.utils.config import DatasetConfig


def load_vertex_dataset(cfg: DatasetConfig) -> VertexDataset:
    """Content + cites (bidirected), or the two_cluster generator."""
    if cfg.synthetic is not None:
        if cfg.synthetic != "two_cluster":
            raise ConfigError(f"{cfg.synthetic!r} is not a vertex-task generator")
        return two_cluster(cfg.synthetic_size, cfg.synthetic_features)
    content = load_content(cfg.content)
    graph, _ = read_cites(cfg.cites, content)
    features = row_normalize(content.features) if cfg.normalize else content.features
    return VertexDataset(
        name=cfg.name or "citation",
        features=features,
        labels=content.labels,
        graph=to_bidirected(graph),
        classes=content.classes,
        ids=content.ids,
    )


def load_digraph_dataset(cfg: DatasetConfig) -> DigraphDataset:
    """Content + cites kept directed, or the planted_direction generator."""
    if cfg.synthetic is not None:
        if cfg.synthetic != "planted_direction":
            raise ConfigError(f"{cfg.synthetic!r} is not a link-task generator")
        return planted_direction(cfg.synthetic_size, cfg.synthetic_features)
    content = load_content(cfg.content)
    graph, _ = read_cites(cfg.cites, content)
    features = row_normalize(content.features) if cfg.normalize else content.features
    return DigraphDataset(cfg.name or "citation", features, graph, content.ids)


def split_spec(cfg: DatasetConfig, seed: int) -> SplitSpec:
    """Explicit split file when configured, else sampled sizes under ``seed``."""
    if cfg.split:
        return load_split_json(cfg.split)
    return SplitSpec(
        train_size=cfg.train_size,
        val_size=cfg.val_size,
        test_size=cfg.test_size,
        per_class=cfg.per_class,
        seed=seed,
    )
