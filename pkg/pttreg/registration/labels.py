"""Ground-truth overlap labels."""

from __future__ import annotations

import numpy as np

from pttreg.geometry.cloud import PointCloud
from pttreg.geometry.neighbors import nearest_neighbors
from pttreg.geometry.transform import RigidTransform
from pttreg.utils.exceptions import ConfigError


def overlap_labels(
    x: PointCloud, y: PointCloud, gt: RigidTransform, overlap_radius: float
) -> np.ndarray:
    """1.0 where gt(x_i) lies strictly closer than the radius to some point of y, else 0.0."""
    if not overlap_radius > 0.0:
        raise ConfigError(f"overlap radius must be positive, got {overlap_radius}")
    _, dist2 = nearest_neighbors(gt.apply(x.points), y.points)
    return (dist2 < overlap_radius**2).astype(np.float64)
