"""Link direction task: hide arc orientations and ask for them back."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Sequence

import numpy as np
from numpy.typing import NDArray

from dpgcnn.autodiff.rng import Rng
from dpgcnn.errors import PreconditionError, TooFewEdges
from dpgcnn.graph.primal import DirectedGraph, remove_self_loops, to_bidirected
from dpgcnn.utils.logging import get_logger

log = get_logger(__name__)

IntArray = NDArray[np.int64]


@dataclass
class LinkTask:
    """Undirected model graph plus labeled edges.

    ``pairs[k]`` is the edge (i, j) with i < j; ``labels[k]`` is 1 when the
    original arc was i -> j and 0 when it was j -> i. ``train``, ``val``
    and ``test`` index into ``pairs``.
    """

    graph: DirectedGraph
    pairs: IntArray
    labels: IntArray
    train: IntArray
    val: IntArray
    test: IntArray
    seed: int
    reciprocal_pairs: int = 0
    self_loops: int = 0

    @property
    def labeled(self) -> int:
        return int(self.pairs.shape[0])

    def sizes(self) -> Dict[str, int]:
        return {"train": len(self.train), "val": len(self.val), "test": len(self.test)}


def make_link_task(
    g: DirectedGraph, fractions: Sequence[float] = (0.1, 0.1, 0.1), seed: int = 0
) -> LinkTask:
    """Sample train/val/test edges whose direction must be predicted.

    Self-loops and both arcs of every reciprocal pair carry no direction;
    they are left unlabeled (still in the model graph) and counted. Part
    sizes are floor(fraction * labelable edges).

    Raises:
        PreconditionError: If the fractions are not three positive numbers summing to <= 1.
        TooFewEdges: If a part would be empty.
    """
    if len(fractions) != 3 or any(f <= 0 for f in fractions) or sum(fractions) > 1.0 + 1e-12:
        raise PreconditionError(f"fractions must be three positive numbers, got {fractions}")

    loops = int(np.count_nonzero(g.src == g.dst))
    simple = remove_self_loops(g)
    reverse = simple.reverse_arcs()
    one_way = reverse < 0
    reciprocal = int(np.count_nonzero(~one_way)) // 2

    src, dst = simple.src[one_way], simple.dst[one_way]
    pairs = np.stack([np.minimum(src, dst), np.maximum(src, dst)], axis=1).astype(np.int64)
    labels = (src < dst).astype(np.int64)
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    pairs, labels = pairs[order], labels[order]

    total = pairs.shape[0]
    sizes = [int(f * total + 1e-9) for f in fractions]
    if min(sizes) == 0:
        raise TooFewEdges(f"{total} labelable edges give part sizes {sizes}")

    perm = Rng(seed).spawn("link_split").permutation(total)
    a, b, c = sizes
    task = LinkTask(
        graph=to_bidirected(simple),
        pairs=pairs,
        labels=labels,
        train=np.sort(perm[:a]),
        val=np.sort(perm[a : a + b]),
        test=np.sort(perm[a + b : a + b + c]),
        seed=seed,
        reciprocal_pairs=reciprocal,
        self_loops=loops,
    )
    log.info(
        "link_task_made",
        labelable=total,
        reciprocal_pairs=reciprocal,
        self_loops=loops,
        seed=seed,
        **task.sizes(),
    )
    return task
