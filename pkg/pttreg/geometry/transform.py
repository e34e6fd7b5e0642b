"""Rigid transforms and the synthetic pair generator."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from pttreg.constants import STREAM_CLOUD, STREAM_JITTER, STREAM_TRANSFORM
from pttreg.geometry.cloud import PointCloud
from pttreg.numerics.linalg import Matrix
from pttreg.numerics.rng import make_rng
from pttreg.utils.exceptions import ContractViolationError

ORTHONORMAL_TOL = 1e-8


@dataclass(frozen=True, slots=True)
class RigidTransform:
    """x -> R x + t with R a proper rotation."""

    rotation: Matrix
    translation: np.ndarray

    def __post_init__(self) -> None:
        r = np.array(self.rotation, dtype=np.float64)
        t = np.array(self.translation, dtype=np.float64).reshape(-1)
        if r.shape != (3, 3) or t.shape != (3,):
            raise ContractViolationError(f"bad transform shapes {r.shape}, {t.shape}")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(t))):
            raise ContractViolationError("transform has non-finite entries")
        if not np.allclose(r.T @ r, np.eye(3), rtol=0.0, atol=ORTHONORMAL_TOL):
            raise ContractViolationError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > ORTHONORMAL_TOL:
            raise ContractViolationError("rotation determinant is not +1")
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m: ArrayLike) -> RigidTransform:
        """Build from a 4x4 homogeneous matrix whose last row is 0 0 0 1."""
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (4, 4):
            raise ContractViolationError(f"homogeneous transform must be 4x4, got {m.shape}")
        if not np.allclose(m[3], [0.0, 0.0, 0.0, 1.0], rtol=0.0, atol=1e-12):
            raise ContractViolationError("last row of a homogeneous transform must be 0 0 0 1")
        return cls(m[:3, :3], m[:3, 3])

    def as_matrix(self) -> Matrix:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def apply(self, points: Matrix) -> Matrix:
        return points @ self.rotation.T + self.translation

    def inverse(self) -> RigidTransform:
        return RigidTransform(self.rotation.T, -self.rotation.T @ self.translation)

    def compose(self, other: RigidTransform) -> RigidTransform:
        """self after other."""
        return RigidTransform(
            self.rotation @ other.rotation, self.rotation @ other.translation + self.translation
        )


def axis_angle_rotation(axis: ArrayLike, angle_rad: float) -> Matrix:
    """Rodrigues rotation about a (not necessarily unit) axis."""
    k = np.asarray(axis, dtype=np.float64)
    norm = np.linalg.norm(k)
    if norm == 0.0:
        raise ContractViolationError("rotation axis must be nonzero")
    k = k / norm
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(angle_rad) * kx + (1.0 - math.cos(angle_rad)) * (kx @ kx)


def random_transform(
    rng: np.random.Generator, max_angle_deg: float = 45.0, max_translation: float = 0.5
) -> RigidTransform:
    """Uniform axis on the sphere, angle in [0, max], translation in the cube."""
    axis = rng.normal(size=3)
    while np.linalg.norm(axis) < 1e-9:
        axis = rng.normal(size=3)
    angle = math.radians(rng.uniform(0.0, max_angle_deg))
    t = rng.uniform(-max_translation, max_translation, size=3)
    return RigidTransform(axis_angle_rotation(axis, angle), t)


def uniform_cloud(n: int, seed: int, *stream: int, cloud_id: str = "uniform") -> PointCloud:
    """n points uniform in the unit cube."""
    rng = make_rng(seed, STREAM_CLOUD, *stream)
    return PointCloud(rng.uniform(0.0, 1.0, size=(n, 3)), cloud_id)


def synthetic_pair(
    base: PointCloud,
    seed: int,
    *,
    jitter: float = 0.0,
    jitter_clip: float = 0.05,
    max_angle_deg: float = 45.0,
    max_translation: float = 0.5,
) -> tuple[PointCloud, PointCloud, RigidTransform]:
    """Source, transformed target and the ground-truth transform.

    The target is gt(source) plus optional Gaussian jitter of std ``jitter``
    clipped to +-``jitter_clip`` per coordinate.
    """
    gt = random_transform(make_rng(seed, STREAM_TRANSFORM), max_angle_deg, max_translation)
    target = gt.apply(base.points)
    if jitter > 0.0:
        noise = make_rng(seed, STREAM_JITTER).normal(0.0, jitter, size=target.shape)
        target = target + np.clip(noise, -jitter_clip, jitter_clip)
    return PointCloud(base.points, f"{base.id}-src"), PointCloud(target, f"{base.id}-dst"), gt
