"""Deterministic random number generation.

Everything stochastic in the package (parameter init, shuffles, synthetic
data, label noise) draws from `Rng`, a thin wrapper around numpy's Philox
counter-based bit generator.  Identical seeds give identical draw sequences
on every platform, which is what makes multi-run experiment averaging and
the two-pass training protocol replayable.
"""

import hashlib

import numpy as np


def derive_seed(seed: int, label: str) -> int:
    """Derive a stable 64-bit subseed from a parent seed and a text label.

    Hash-based so that streams for different components ("init", "shuffle",
    "epoch3", ...) never overlap and never depend on draw order.
    """
    digest = hashlib.sha256(f"{seed:d}/{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


class Rng:
    """Counter-based generator with named child streams."""

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(np.random.Philox(key=self.seed))

    def child(self, label: str) -> "Rng":
        """Independent stream keyed by `label`; order of creation is irrelevant."""
        return Rng(derive_seed(self.seed, label))

    def normal(self, shape, scale=1.0):
        return self._gen.normal(0.0, scale, size=shape)

    def uniform(self, low, high, shape):
        return self._gen.uniform(low, high, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integers(self, low, high, shape=None):
        return self._gen.integers(low, high, size=shape)

    def random(self, shape=None):
        return self._gen.random(size=shape)
