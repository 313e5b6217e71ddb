"""Deterministic random-number streams.

Every stochastic routine draws from a stream addressed by a tuple of integer
ids under a single root seed. Streams are Philox counter-based generators, so
any stream can be created on demand, in any order, on any worker, and the
draws it yields depend only on (seed, ids). That is what makes filter output
independent of thread count and lets reruns reproduce results bit for bit.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Streams", "as_streams"]


class Streams:
    """Family of named random streams derived from one seed.

    ``child(*ids)`` narrows the address; ``generator()`` materializes the
    stream at the current address. Two Streams with the same seed and id path
    always produce identical generators.
    """

    def __init__(self, seed, _key=()):
        if isinstance(seed, np.random.SeedSequence):
            if _key:
                raise ValueError("pass ids via child(), not _key, for SeedSequence roots")
            self._entropy = seed.entropy
            self._key = tuple(seed.spawn_key)
        else:
            self._entropy = int(seed)
            self._key = tuple(int(i) for i in _key)

    @property
    def key(self):
        return self._key

    def child(self, *ids: int) -> "Streams":
        return Streams(self._entropy, self._key + tuple(int(i) for i in ids))

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(entropy=self._entropy, spawn_key=self._key)

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(self.seed_sequence()))

    def generators(self, n: int, *prefix: int) -> list:
        """n generators at addresses prefix + (0,), ..., prefix + (n-1,)."""
        return [self.child(*prefix, k).generator() for k in range(n)]

    def __repr__(self):
        return f"Streams(seed={self._entropy}, key={self._key})"


def as_streams(rng) -> Streams:
    """Coerce an int seed, SeedSequence, or Streams into a Streams root."""
    if isinstance(rng, Streams):
        return rng
    if isinstance(rng, (int, np.integer, np.random.SeedSequence)):
        return Streams(rng)
    raise TypeError(f"expected an int seed, SeedSequence, or Streams, got {type(rng).__name__}")
