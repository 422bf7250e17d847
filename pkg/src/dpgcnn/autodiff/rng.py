"""SplitMix64 random streams.

Draw k of a stream with state s is mix(s + k * GAMMA) (mod 2**64), so a
block of draws is computed in one vectorised pass and the sequence is the
same on every platform and numpy version.
"""

from __future__ import annotations

import hashlib
from typing import Tuple, Union

import numpy as np
from numpy.typing import NDArray

GAMMA = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)


def _mix_scalar(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _mix(z: NDArray[np.uint64]) -> NDArray[np.uint64]:
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _name_hash(name: str) -> int:
    return int.from_bytes(hashlib.blake2b(name.encode("utf-8"), digest_size=8).digest(), "big")


class Rng:
    """A SplitMix64 stream.

    Consumers take their own child stream via ``spawn(name)``; a child's
    seed depends only on the parent seed and the name, never on how many
    draws the parent (or a sibling) has made.
    """

    def __init__(self, seed: int) -> None:
        self.seed = int(seed) & MASK64
        self._state = self.seed

    def spawn(self, name: str) -> "Rng":
        return Rng(_mix_scalar(self.seed ^ _name_hash(name)))

    def next_u64(self) -> int:
        self._state = (self._state + GAMMA) & MASK64
        return _mix_scalar(self._state)

    def uint64(self, size: Union[int, Tuple[int, ...]]) -> NDArray[np.uint64]:
        shape = (size,) if isinstance(size, int) else tuple(size)
        count = int(np.prod(shape, dtype=np.int64))
        steps = np.arange(1, count + 1, dtype=np.uint64) * np.uint64(GAMMA)
        out = _mix(steps + np.uint64(self._state))
        self._state = (self._state + count * GAMMA) & MASK64
        return out.reshape(shape)

    def uniform(self, size: Union[int, Tuple[int, ...]]) -> NDArray[np.float64]:
        """Floats in [0, 1) with 53 random bits each."""
        return (self.uint64(size) >> _S11).astype(np.float64) * (2.0**-53)

    def random_keys(self, n: int) -> NDArray[np.float64]:
        """Sort keys for uniform sampling without replacement."""
        return self.uniform(n)

    def permutation(self, n: int) -> NDArray[np.int64]:
        return np.argsort(self.uniform(n), kind="stable").astype(np.int64)

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed})"
