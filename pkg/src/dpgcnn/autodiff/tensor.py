"""Dense 2-D tensors recorded on a tape for reverse-mode differentiation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from dpgcnn.errors import NonFiniteValue, NonScalarLoss, ShapeMismatch

Array = NDArray[np.float64]
Vjp = Callable[[Array], Tuple[Optional[Array], ...]]


@dataclass(eq=False)
class Parameter:
    """A learnable 2-D array and its most recent gradient."""

    name: str
    value: Array
    grad: Optional[Array] = None

    def __post_init__(self) -> None:
        self.value = np.array(self.value, dtype=np.float64, ndmin=2)

    @property
    def size(self) -> int:
        return int(self.value.size)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.value.shape  # type: ignore[return-value]

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


class Tensor:
    """A rows x cols float64 array, optionally tracked by a Tape.

    ``node_id`` is the tensor's record index on its tape, or None for a
    constant.
    """

    __slots__ = ("value", "tape", "node_id")

    def __init__(
        self, value: Array, tape: Optional["Tape"] = None, node_id: Optional[int] = None
    ) -> None:
        value = np.asarray(value, dtype=np.float64)
        if value.ndim != 2:
            raise ShapeMismatch(f"tensors are 2-D, got shape {value.shape}")
        self.value = value
        self.tape = tape
        self.node_id = node_id

    @property
    def rows(self) -> int:
        return int(self.value.shape[0])

    @property
    def cols(self) -> int:
        return int(self.value.shape[1])

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def tracked(self) -> bool:
        return self.node_id is not None

    def numpy(self) -> Array:
        return self.value

    def __repr__(self) -> str:
        where = "constant" if self.node_id is None else f"node {self.node_id}"
        return f"Tensor({self.rows}x{self.cols}, {where})"


def constant(value: Array) -> Tensor:
    return Tensor(np.array(value, dtype=np.float64, ndmin=2))


@dataclass
class _Record:
    op: str
    parents: Tuple[Optional[int], ...]
    vjp: Optional[Vjp]
    param: Optional[Parameter] = None


@dataclass
class Tape:
    """Ordered op records; parents always precede the records that use them."""

    debug: bool = False
    records: List[_Record] = field(default_factory=list)
    backward_visits: int = 0
    _watched: Dict[int, Tensor] = field(default_factory=dict)
    _consumed: bool = False

    def __len__(self) -> int:
        return len(self.records)

    def watch(self, param: Parameter) -> Tensor:
        """Leaf tensor for ``param`` (one leaf per parameter per tape)."""
        key = id(param)
        if key not in self._watched:
            self.records.append(_Record("leaf", (), None, param))
            self._watched[key] = Tensor(param.value, self, len(self.records) - 1)
        return self._watched[key]

    def record(self, op: str, value: Array, parents: Sequence[Tensor], vjp: Vjp) -> Tensor:
        """Append an op; untracked inputs make the output a constant."""
        if self.debug and not np.all(np.isfinite(value)):
            raise NonFiniteValue(f"{op} produced a non-finite value")
        ids = tuple(p.node_id if p.tape is self else None for p in parents)
        if all(i is None for i in ids):
            return Tensor(value)
        self.records.append(_Record(op, ids, vjp))
        return Tensor(value, self, len(self.records) - 1)


def tape_of(*tensors: Tensor) -> Optional[Tape]:
    for t in tensors:
        if t.tape is not None:
            return t.tape
    return None


def backward(tape: Tape, loss: Tensor) -> Dict[Parameter, Array]:
    """Reverse sweep from a 1x1 loss; fills ``grad`` on every watched parameter.

    Every record is visited exactly once. Parameters the loss does not
    depend on get a zero gradient.

    Raises:
        NonScalarLoss: If ``loss`` is not 1x1.
    """
    if loss.shape != (1, 1):
        raise NonScalarLoss(f"loss must be 1x1, got {loss.rows}x{loss.cols}")
    if tape._consumed:
        raise RuntimeError("tape already differentiated")
    tape._consumed = True

    grads: List[Optional[Array]] = [None] * len(tape.records)
    if loss.tape is tape and loss.node_id is not None:
        grads[loss.node_id] = np.ones((1, 1))

    out: Dict[Parameter, Array] = {}
    for idx in range(len(tape.records) - 1, -1, -1):
        tape.backward_visits += 1
        rec = tape.records[idx]
        g = grads[idx]
        if rec.param is not None:
            grad = g if g is not None else np.zeros_like(rec.param.value)
            rec.param.grad = grad
            out[rec.param] = grad
            continue
        if g is None or rec.vjp is None:
            continue
        for pid, pg in zip(rec.parents, rec.vjp(g)):
            if pid is None or pg is None:
                continue
            prev = grads[pid]
            grads[pid] = pg if prev is None else prev + pg
        grads[idx] = None
    return out
