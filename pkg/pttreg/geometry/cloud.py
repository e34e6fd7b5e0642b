"""Point cloud container."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike

from pttreg.numerics.linalg import Matrix
from pttreg.utils.exceptions import ContractViolationError, EmptyCloudError


def _frozen(values: ArrayLike) -> Matrix:
    arr = np.array(values, dtype=np.float64, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, slots=True)
class PointCloud:
    """Ordered 3-D points with optional per-point features.

    The arrays are copied and made read-only on construction.
    """

    points: Matrix
    id: str = "cloud"
    features: Matrix | None = field(default=None)

    def __post_init__(self) -> None:
        pts = _frozen(self.points)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ContractViolationError(f"points must have shape (n, 3), got {pts.shape}")
        if pts.shape[0] == 0:
            raise EmptyCloudError(f"point cloud '{self.id}' is empty")
        if not np.all(np.isfinite(pts)):
            raise ContractViolationError(f"point cloud '{self.id}' has non-finite coordinates")
        object.__setattr__(self, "points", pts)
        if self.features is not None:
            feats = _frozen(self.features)
            if feats.ndim != 2 or feats.shape[0] != pts.shape[0]:
                raise ContractViolationError(
                    f"features {feats.shape} do not align with {pts.shape[0]} points"
                )
            object.__setattr__(self, "features", feats)

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def translated(self, offset: ArrayLike) -> PointCloud:
        """Copy of the cloud shifted by offset."""
        return PointCloud(self.points + np.asarray(offset, dtype=np.float64), self.id, self.features)
