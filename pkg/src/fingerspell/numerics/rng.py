"""Seeded random streams."""

from __future__ import annotations

import numpy as np


def make_rng(seed) -> np.random.Generator:
    """Return an independent PCG64 stream for ``seed`` (int or SeedSequence)."""
    return np.random.Generator(np.random.PCG64(seed))


def spawn(seed: int, *names: str) -> dict:
    """Derive one named child stream per entry in ``names`` from a single seed."""
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {name: make_rng(child) for name, child in zip(names, children)}
