"""Seeded random source shared by every stochastic operator.

All randomness in the package flows through a :class:`RandomSource`. The
stream is numpy's PCG64 generator (128-bit LCG, multiplier
0x2360ED051FC65DA44385DF649FCCF645, XSL-RR output) seeded through
``SeedSequence(seed)``, so a seed fully determines every draw.
"""

from __future__ import annotations

import numpy as np

MAX_SEED = 2**64 - 1


class RandomSource:
    """Deterministic stream of draws for one logical task.

    Not thread-safe; derive a sub-source with :meth:`spawn` for each
    parallel worker instead of sharing one.
    """

    def __init__(self, seed: int, worker: int | None = None):
        if not 0 <= seed <= MAX_SEED:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.worker = worker
        spawn_key = () if worker is None else (worker,)
        self._gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=spawn_key)))

    def __repr__(self) -> str:
        if self.worker is None:
            return f"RandomSource(seed={self.seed})"
        return f"RandomSource(seed={self.seed}, worker={self.worker})"

    def spawn(self, worker: int) -> RandomSource:
        """Independent sub-source mixing this source's seed with a worker index."""
        if worker < 0:
            raise ValueError("worker index must be non-negative")
        return RandomSource(self.seed, worker=worker)

    def next_unit(self) -> float:
        """One uniform draw on [0, 1)."""
        return float(self._gen.random())

    def next_index(self, n: int) -> int:
        """One uniform draw on {0, ..., n - 1}."""
        if n < 1:
            raise ValueError(f"next_index needs n >= 1, got {n}")
        return int(self._gen.integers(0, n))

    # batched draws, used by the vectorised operators

    def units(self, size) -> np.ndarray:
        return self._gen.random(size)

    def indices(self, n: int, size) -> np.ndarray:
        if n < 1:
            raise ValueError(f"indices needs n >= 1, got {n}")
        return self._gen.integers(0, n, size=size)

    def uniform(self, low, high, size=None):
        return self._gen.uniform(low, high, size)

    def normals(self, size) -> np.ndarray:
        return self._gen.standard_normal(size)

    def bits(self, size) -> np.ndarray:
        return self._gen.integers(0, 2, size=size, dtype=np.uint8)

    def sample(self, n: int, k: int) -> np.ndarray:
        """k distinct indices from range(n), in draw order."""
        return self._gen.choice(n, size=k, replace=False)


def new_source(seed: int) -> RandomSource:
    return RandomSource(seed)
