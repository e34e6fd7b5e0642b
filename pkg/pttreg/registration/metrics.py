"""Registration error metrics and recall."""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np

from pttreg.config import MetricThresholds
from pttreg.core.state import RecallSummary, RegistrationMetrics
from pttreg.geometry.neighbors import nearest_neighbors
from pttreg.geometry.transform import RigidTransform
from pttreg.numerics.linalg import Matrix
from pttreg.utils.exceptions import ContractViolationError


def rotation_error_deg(r_est: Matrix, r_gt: Matrix) -> float:
    """Angle of R_gtᵀ R_est in degrees.

    Evaluated as atan2(sin, cos) of the relative rotation, which equals the
    arccos of (trace - 1) / 2 without its loss of precision near 0 and 180.
    """
    rel = r_gt.T @ r_est
    cos = (np.trace(rel) - 1.0) / 2.0
    sin = np.linalg.norm([rel[2, 1] - rel[1, 2], rel[0, 2] - rel[2, 0], rel[1, 0] - rel[0, 1]]) / 2.0
    return math.degrees(math.atan2(sin, cos))


def translation_error(est: RigidTransform, gt: RigidTransform) -> float:
    return float(np.linalg.norm(est.translation - gt.translation))


def chamfer_distance(a: Matrix, b: Matrix) -> float:
    """Average of the mean squared nearest-neighbour distances a->b and b->a."""
    _, d_ab = nearest_neighbors(a, b)
    _, d_ba = nearest_neighbors(b, a)
    return float(0.5 * (d_ab.mean() + d_ba.mean()))


def metrics(
    est: RigidTransform,
    gt: RigidTransform,
    source: Matrix,
    target: Matrix,
    thresholds: MetricThresholds,
) -> RegistrationMetrics:
    """Rotation/translation errors, RMSE over the source and the chamfer distance."""
    if source.shape[0] == 0:
        raise ContractViolationError("metrics need a nonempty source cloud")
    rre = rotation_error_deg(est.rotation, gt.rotation)
    rte = translation_error(est, gt)
    rmse = float(np.sqrt(np.mean(np.sum((est.apply(source) - gt.apply(source)) ** 2, axis=1))))
    return RegistrationMetrics(
        rre_deg=rre,
        rte=rte,
        rmse=rmse,
        chamfer=chamfer_distance(est.apply(source), target),
        success=rre < thresholds.max_rre_deg and rte < thresholds.max_rte,
        success_rmse=rmse < thresholds.max_rmse,
    )


def registration_recall(results: Sequence[RegistrationMetrics]) -> RecallSummary:
    """Fraction of successful pairs under both criteria, with median errors."""
    if not results:
        raise ContractViolationError("recall needs at least one result")
    return RecallSummary(
        pairs=len(results),
        recall=sum(r.success for r in results) / len(results),
        recall_rmse=sum(r.success_rmse for r in results) / len(results),
        median_rre_deg=float(np.median([r.rre_deg for r in results])),
        median_rte=float(np.median([r.rte for r in results])),
    )
