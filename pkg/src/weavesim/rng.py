"""Seeded random streams keyed by stable identifiers.

Every consumer of randomness asks for its own generator by a string key
(node id, trial label, ...), so results never depend on iteration order or
on Python's per-process hash randomization.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stable_key(*parts) -> list[int]:
    digest = hashlib.sha256("\x1f".join(str(p) for p in parts).encode()).digest()
    return [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]


class RngStreams:
    def __init__(self, seed: int):
        self.seed = int(seed)
        self._cache: dict[tuple, np.random.Generator] = {}

    def get(self, *key) -> np.random.Generator:
        gen = self._cache.get(key)
        if gen is None:
            seq = np.random.SeedSequence(entropy=self.seed, spawn_key=stable_key(*key))
            gen = self._cache[key] = np.random.Generator(np.random.PCG64(seq))
        return gen


def generator(seed: int, *key) -> np.random.Generator:
    """One-off generator for (seed, key); equal arguments give equal streams."""
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=stable_key(*key))
    return np.random.Generator(np.random.PCG64(seq))
