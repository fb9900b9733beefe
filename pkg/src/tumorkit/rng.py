"""Deterministic 64-bit PRNG for all synthetic fixtures.

splitmix64 is used instead of ``random`` or ``numpy.random`` so that
generated phantoms are byte-identical across platforms, library versions,
and reimplementations in other languages.  The generator advances its
state by the golden-gamma constant and mixes it with two xor-shift
multiplies (constants 0x9E3779B97F4A7C15, 0xBF58476D1CE4E5B9,
0x94D049BB133111EB, shifts 30/27/31).
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """splitmix64 stream seeded with a 64-bit integer."""

    def __init__(self, seed: int):
        self._state = seed & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & MASK64
        return z ^ (z >> 31)

    def next_u64_array(self, n: int) -> np.ndarray:
        """Vectorised stream; identical values to n calls of next_u64."""
        if n <= 0:
            return np.empty(0, dtype=np.uint64)
        steps = np.arange(1, n + 1, dtype=np.uint64) * np.uint64(_GAMMA)
        states = np.uint64(self._state) + steps
        self._state = int(states[-1])
        return _mix_array(states)

    def uniform(self) -> float:
        """Float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform_array(self, n: int) -> np.ndarray:
        return (self.next_u64_array(n) >> np.uint64(11)) * (1.0 / (1 << 53))

    def uniform_in(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.uniform()

    def randint(self, lo: int, hi: int) -> int:
        """Integer in [lo, hi], both ends inclusive, rejection-sampled."""
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        span = hi - lo + 1
        limit = (1 << 64) - ((1 << 64) % span)
        while True:
            v = self.next_u64()
            if v < limit:
                return lo + (v % span)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(0, i)
            items[i], items[j] = items[j], items[i]


def derive_seed(master: int, *stream: int) -> int:
    """Derive an independent substream seed from a master seed.

    Mixing each stream index through a fresh splitmix64 step keeps
    substreams decorrelated even for adjacent indices.
    """
    out = SplitMix64(master).next_u64()
    for s in stream:
        out = SplitMix64(out ^ (s & MASK64)).next_u64()
    return out
