"""Weighted rigid alignment of corresponding point sets."""

from __future__ import annotations

import numpy as np

from pttreg.constants import DEGENERATE_RANK_TOL
from pttreg.geometry.transform import RigidTransform
from pttreg.numerics.linalg import Matrix
from pttreg.numerics.svd import svd_3x3
from pttreg.registration.decoder import Correspondences
from pttreg.utils.exceptions import ContractViolationError, DegenerateGeometryError


def weighted_procrustes(src: Matrix, dst: Matrix, weights: np.ndarray) -> RigidTransform:
    """Minimise sum_i w_i |R src_i + t - dst_i|^2 over proper rotations.

    Args:
        src: (n, 3) source points, n >= 3.
        dst: (n, 3) corresponding destination points.
        weights: (n,) nonnegative weights with a positive sum.

    Raises:
        ContractViolationError: On shape mismatch, n < 3 or negative weights.
        DegenerateGeometryError: If the weights vanish or the weighted
            cross-covariance has rank below 2.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if src.ndim != 2 or src.shape[1] != 3 or src.shape != dst.shape or w.shape != (src.shape[0],):
        raise ContractViolationError(f"shapes {src.shape}, {dst.shape}, {w.shape} do not correspond")
    if src.shape[0] < 3:
        raise ContractViolationError(f"need at least 3 correspondences, got {src.shape[0]}")
    if np.any(w < 0.0) or not np.all(np.isfinite(w)):
        raise ContractViolationError("weights must be finite and nonnegative")
    total = w.sum()
    if total <= 0.0:
        raise DegenerateGeometryError("correspondence weights sum to zero")
    w = w / total

    mu_s = w @ src
    mu_d = w @ dst
    h = (src - mu_s).T @ ((dst - mu_d) * w[:, None])
    u, s, v = svd_3x3(h)
    if s[0] <= 0.0 or s[1] <= DEGENERATE_RANK_TOL * s[0]:
        raise DegenerateGeometryError(f"weighted cross-covariance is rank-deficient (singular values {s})")
    d = 1.0 if np.linalg.det(v @ u.T) >= 0.0 else -1.0
    rotation = v @ np.diag([1.0, 1.0, d]) @ u.T
    return RigidTransform(rotation, mu_d - rotation @ mu_s)


def estimate_transform(src: Matrix, dst: Matrix, corr: Correspondences) -> RigidTransform:
    """One weighted solve over both directions.

    Pairs (src_i -> counterpart_x_i) carry the source scores and pairs
    (counterpart_y_j -> dst_j) the target scores.
    """
    if corr.counterpart_x.shape != src.shape or corr.counterpart_y.shape != dst.shape:
        raise ContractViolationError("correspondences do not match the clouds")
    return weighted_procrustes(
        np.vstack([src, corr.counterpart_y]),
        np.vstack([corr.counterpart_x, dst]),
        np.concatenate([corr.scores_x, corr.scores_y]),
    )
