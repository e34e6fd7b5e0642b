"""Seeded random streams."""

from __future__ import annotations

import numpy as np


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Return an independent generator for (seed, *stream).

    Consumers pass their own stream ids (see constants.STREAM_*) so that
    adding draws in one place never shifts another consumer's numbers.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *stream])))


def uniform_init(
    rng: np.random.Generator, rows: int, cols: int, fan_in: int
) -> np.ndarray:
    """Weights drawn uniformly from [-1/sqrt(fan_in), 1/sqrt(fan_in)]."""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=(rows, cols))
