"""3x3 singular value decomposition by one-sided cyclic Jacobi rotations."""

from __future__ import annotations

import math

import numpy as np

from pttreg.constants import JACOBI_MAX_SWEEPS, JACOBI_TOLERANCE
from pttreg.numerics.linalg import Matrix
from pttreg.utils.exceptions import ContractViolationError, ConvergenceError

_PAIRS = ((0, 1), (0, 2), (1, 2))


def _orthonormal_complement(u: Matrix, rank: int) -> Matrix:
    """Fill columns rank..2 of u so that u is orthonormal."""
    if rank == 0:
        return np.eye(3)
    out = u.copy()
    if rank == 1:
        first = out[:, 0]
        # cross with the axis least aligned with the first column
        axis = np.zeros(3)
        axis[int(np.argmin(np.abs(first)))] = 1.0
        second = np.cross(first, axis)
        out[:, 1] = second / np.linalg.norm(second)
    out[:, 2] = np.cross(out[:, 0], out[:, 1])
    return out


def svd_3x3(m: Matrix) -> tuple[Matrix, np.ndarray, Matrix]:
    """Decompose m = U diag(s) V^T.

    Columns of m are rotated pairwise until mutually orthogonal; V
    accumulates the rotations and the column norms are the singular values.
    Columns whose norm vanishes relative to the largest are replaced by an
    orthonormal completion so that U stays orthonormal for rank-deficient input.

    Args:
        m: 3x3 matrix with finite entries.

    Returns:
        (U, s, V) with s descending and nonnegative.

    Raises:
        ConvergenceError: If the sweep cap is reached before convergence.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3) or not np.all(np.isfinite(m)):
        raise ContractViolationError(f"svd_3x3 expects a finite 3x3 matrix, got {m.shape}")

    a = m.copy()
    v = np.eye(3)
    for _ in range(JACOBI_MAX_SWEEPS):
        rotated = False
        for p, q in _PAIRS:
            alpha = float(a[:, p] @ a[:, p])
            beta = float(a[:, q] @ a[:, q])
            gamma = float(a[:, p] @ a[:, q])
            if gamma == 0.0 or abs(gamma) <= JACOBI_TOLERANCE * math.sqrt(alpha * beta):
                continue
            rotated = True
            zeta = (beta - alpha) / (2.0 * gamma)
            t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
            c = 1.0 / math.sqrt(1.0 + t * t)
            s = c * t
            ap, aq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = c * ap - s * aq
            a[:, q] = s * ap + c * aq
            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq
        if not rotated:
            break
    else:
        raise ConvergenceError(f"Jacobi SVD did not converge in {JACOBI_MAX_SWEEPS} sweeps")

    norms = np.linalg.norm(a, axis=0)
    order = np.argsort(-norms, kind="stable")
    sing = norms[order]
    a = a[:, order]
    v = v[:, order]

    floor = sing[0] * 1e-12
    rank = int(np.sum(sing > floor)) if sing[0] > 0.0 else 0
    u = np.zeros((3, 3))
    for i in range(rank):
        u[:, i] = a[:, i] / sing[i]
    if rank < 3:
        u = _orthonormal_complement(u, rank)
    return u, sing, v
