"""Seed handling."""
from __future__ import annotations

import numpy as np


def as_generator(seed) -> np.random.Generator:
    """Return ``seed`` itself if it is already a Generator, else seed one."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn_seeds(seed: int, n: int) -> list[np.random.SeedSequence]:
    """Derive ``n`` independent child seed sequences from an integer seed."""
    return np.random.SeedSequence(seed).spawn(n)
