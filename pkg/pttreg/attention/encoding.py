"""Sinusoidal positional encoding of 3-D coordinates."""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike

from pttreg.numerics.linalg import Matrix
from pttreg.utils.exceptions import ConfigError, ContractViolationError


def sinusoidal_pe(coords: ArrayLike, d_model: int, base_freq: float = 10000.0) -> Matrix:
    """Per-axis transformer encoding.

    Axis a occupies columns ``a*D/3:(a+1)*D/3``; within it column 2k holds
    ``sin(x / base_freq**(6k/D))`` and column 2k+1 the matching cosine.

    Args:
        coords: (n, 3) coordinates.
        d_model: Encoding width D, divisible by 6.
        base_freq: Frequency base of the geometric schedule.

    Returns:
        (n, D) matrix with entries in [-1, 1].

    Raises:
        ConfigError: If D is not divisible by 6.
    """
    if d_model <= 0 or d_model % 6 != 0:
        raise ConfigError(f"positional encoding width {d_model} is not divisible by 6")
    c = np.asarray(coords, dtype=np.float64)
    if c.ndim != 2 or c.shape[1] != 3:
        raise ContractViolationError(f"coordinates must be (n, 3), got {c.shape}")
    pairs = d_model // 6
    inv_freq = base_freq ** (-6.0 * np.arange(pairs) / d_model)
    angles = c[:, :, None] * inv_freq
    pe = np.empty((c.shape[0], 3, pairs, 2))
    pe[..., 0] = np.sin(angles)
    pe[..., 1] = np.cos(angles)
    return pe.reshape(c.shape[0], d_model)
