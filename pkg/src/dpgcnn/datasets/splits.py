"""Train / validation / test vertex splits."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
from numpy.typing import NDArray

from dpgcnn.autodiff.rng import Rng
from dpgcnn.datasets.citation import ContentTable
from dpgcnn.errors import InfeasibleSplit, OverlappingSplits, ParseError, UnknownId
from dpgcnn.utils.logging import get_logger

log = get_logger(__name__)

IntArray = NDArray[np.int64]


@dataclass
class SplitSpec:
    """Either explicit id lists or sizes to sample with ``seed``.

    With ``per_class`` the training set takes ``train_size // classes``
    vertices from every class (the remainder goes to the first classes);
    validation and test are then drawn uniformly from what is left.
    """

    train: Optional[List[str]] = None
    val: Optional[List[str]] = None
    test: Optional[List[str]] = None
    train_size: int = 140
    val_size: int = 500
    test_size: int = 1000
    per_class: bool = True
    seed: int = 0

    @property
    def explicit(self) -> bool:
        return self.train is not None


@dataclass
class Split:
    """Sorted row indices of each part."""

    train: IntArray
    val: IntArray
    test: IntArray

    def sizes(self) -> Dict[str, int]:
        return {"train": len(self.train), "val": len(self.val), "test": len(self.test)}

    def to_ids(self, content: ContentTable) -> Dict[str, List[str]]:
        return {
            part: [content.ids[int(i)] for i in getattr(self, part)]
            for part in ("train", "val", "test")
        }


def _check_disjoint(train: IntArray, val: IntArray, test: IntArray) -> None:
    pairs = ((train, val, "train/val"), (train, test, "train/test"), (val, test, "val/test"))
    for a, b, names in pairs:
        shared = np.intersect1d(a, b)
        if shared.size:
            raise OverlappingSplits(f"{names} share {shared.size} ids")


def _explicit(content: ContentTable, spec: SplitSpec) -> Split:
    parts = []
    for ids in (spec.train, spec.val or [], spec.test or []):
        assert ids is not None
        missing = [i for i in ids if i not in content.index]
        if missing:
            raise UnknownId(
                f"{len(missing)} split ids not in the content table, e.g. {missing[0]!r}"
            )
        rows = np.array([content.index[i] for i in ids], dtype=np.int64)
        if np.unique(rows).shape[0] != rows.shape[0]:
            raise OverlappingSplits("a split part lists the same id twice")
        parts.append(np.sort(rows))
    _check_disjoint(*parts)
    return Split(*parts)


def _sampled(content: ContentTable, spec: SplitSpec) -> Split:
    n = content.n
    if min(spec.train_size, spec.val_size, spec.test_size) < 0:
        raise InfeasibleSplit("split sizes must be non-negative")
    keys = Rng(spec.seed).spawn("splits").random_keys(n)
    order = np.lexsort((np.arange(n), keys))

    if spec.per_class:
        k = content.num_classes
        quota = [spec.train_size // k + (1 if c < spec.train_size % k else 0) for c in range(k)]
        train_parts = []
        for c in range(k):
            members = order[content.labels[order] == c]
            if members.shape[0] < quota[c]:
                raise InfeasibleSplit(
                    f"class {content.classes[c]!r} has {members.shape[0]} vertices, "
                    f"{quota[c]} requested"
                )
            train_parts.append(members[: quota[c]])
        train = np.concatenate(train_parts) if train_parts else np.zeros(0, dtype=np.int64)
    else:
        if spec.train_size > n:
            raise InfeasibleSplit(f"{spec.train_size} training vertices requested, {n} exist")
        train = order[: spec.train_size]

    rest = order[~np.isin(order, train)]
    if spec.val_size + spec.test_size > rest.shape[0]:
        raise InfeasibleSplit(
            f"{spec.val_size} + {spec.test_size} held-out vertices requested, {rest.shape[0]} left"
        )
    val = rest[: spec.val_size]
    test = rest[spec.val_size : spec.val_size + spec.test_size]
    return Split(np.sort(train), np.sort(val), np.sort(test))


def make_split(content: ContentTable, spec: SplitSpec) -> Split:
    """Resolve a SplitSpec against a content table.

    Raises:
        UnknownId: Explicit ids missing from the table.
        OverlappingSplits: Explicit parts sharing ids.
        InfeasibleSplit: Sampled sizes larger than the available vertices.
    """
    split = _explicit(content, spec) if spec.explicit else _sampled(content, spec)
    log.info("split_made", explicit=spec.explicit, seed=spec.seed, **split.sizes())
    return split


def load_split_json(path: Union[str, Path]) -> SplitSpec:
    """Read ``{"train": [...], "val": [...], "test": [...]}``.

    Raises:
        FileNotFoundError: If the file is missing.
        ParseError: If the document is not a split.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: {e}") from e
    if not isinstance(data, dict) or "train" not in data:
        raise ParseError(f"{path}: expected an object with train/val/test id lists")
    return SplitSpec(
        train=[str(i) for i in data["train"]],
        val=[str(i) for i in data.get("val", [])],
        test=[str(i) for i in data.get("test", [])],
    )


def save_split_json(split: Split, content: ContentTable, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(split.to_ids(content), indent=2) + "\n", encoding="utf-8")
