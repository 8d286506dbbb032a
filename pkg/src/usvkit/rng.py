"""Seeded, splittable random number generation.

Every stochastic operation in the package draws from an `Rng` handle so that
runs are reproducible bit-for-bit: the same seed always yields the same
stream, and independent substreams are derived by `split` rather than by
sharing one generator across consumers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Rng:
    """Handle on a counter-based (Philox) random stream.

    `generator()` always restarts the stream from the beginning, so create
    one generator per operation and draw from it sequentially.
    """

    seed: int
    path: tuple[int, ...] = field(default=())

    def split(self, *ids: int) -> "Rng":
        """Derive an independent child stream, e.g. one per call index."""
        return Rng(self.seed, self.path + tuple(int(i) for i in ids))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(seed=seq))
