"""Deterministic randomness.

Every stochastic operation in the package takes an explicit seed or Rng;
there is no global random state. The generator core is counter-based
(Philox), so equal seeds give equal sequences on any platform.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["Rng"]

_MASK64 = (1 << 64) - 1


class Rng:
    """Seeded random source wrapping a counter-based numpy generator."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self.gen = np.random.Generator(np.random.Philox(key=self.seed))

    @classmethod
    def coerce(cls, seed_or_rng) -> "Rng":
        if isinstance(seed_or_rng, Rng):
            return seed_or_rng
        return cls(seed_or_rng)

    def child(self, label: str) -> "Rng":
        """Derive an independent stream for a named purpose.

        The child seed is the first 8 bytes of SHA-256(seed || label), so
        child streams are stable regardless of draw order on the parent.
        """
        h = hashlib.sha256(self.seed.to_bytes(8, "big") + label.encode("utf-8"))
        return Rng(int.from_bytes(h.digest()[:8], "big"))

    # thin delegations; keep call sites short
    def bytes(self, n: int) -> bytes:
        return self.gen.bytes(n)

    def u64(self) -> int:
        return int.from_bytes(self.gen.bytes(8), "big")

    def random(self, size=None):
        return self.gen.random(size)

    def uniform(self, low, high, size=None):
        return self.gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.gen.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size)

    def permutation(self, n: int):
        return self.gen.permutation(n)

    def choice(self, a, size=None, p=None, replace=True):
        return self.gen.choice(a, size=size, p=p, replace=replace)
