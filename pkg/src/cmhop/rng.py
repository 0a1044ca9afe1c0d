"""Counter-based random streams keyed by (seed, replication, ...)."""

from __future__ import annotations

import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent Philox stream for ``seed`` and an integer key path.

    The same (seed, key) always yields the same stream, regardless of
    which worker thread asks for it or in what order.
    """
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


class UniformBuffer:
    """Buffered scalar draws from a generator.

    Pulling scalars one at a time from numpy is slow; this fetches blocks.
    Any object exposing ``random(size)`` and ``integers(low, high, size)``
    works, which is how scripted draws are injected in tests.
    """

    def __init__(self, rng, block: int = 4096, first: int = 64):
        self.rng = rng
        self.max_block = block
        self.block = min(first, block)
        self._ints: list[int] = []
        self._high = None

    def integer(self, high: int) -> int:
        """Uniform integer in [0, high)."""
        if high != self._high:
            self._ints = []
            self._high = high
        if not self._ints:
            vals = self.rng.integers(0, high, size=self.block)
            self.block = min(2 * self.block, self.max_block)  # fixed schedule keeps runs reproducible
            self._ints = [int(v) for v in vals[::-1]]
        return self._ints.pop()
