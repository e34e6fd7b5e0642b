"""Correspondence and overlap heads."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pttreg.attention.weights import DecoderWeights
from pttreg.constants import PROBABILITY_EPS
from pttreg.geometry.cloud import PointCloud
from pttreg.geometry.neighbors import nearest_neighbors
from pttreg.geometry.transform import RigidTransform
from pttreg.numerics.linalg import Matrix, linear_forward, sigmoid
from pttreg.registration.labels import overlap_labels
from pttreg.utils.exceptions import ContractViolationError


@dataclass(frozen=True, slots=True)
class Correspondences:
    """Predicted counterparts and overlap scores for both clouds.

    ``counterpart_x[i]`` is the predicted position in the target frame of
    source point i; ``counterpart_y[j]`` the predicted source-frame position
    of target point j.
    """

    counterpart_x: Matrix
    counterpart_y: Matrix
    scores_x: np.ndarray
    scores_y: np.ndarray

    def __post_init__(self) -> None:
        for coords, scores, side in (
            (self.counterpart_x, self.scores_x, "source"),
            (self.counterpart_y, self.scores_y, "target"),
        ):
            if coords.ndim != 2 or coords.shape[1] != 3 or scores.shape != (coords.shape[0],):
                raise ContractViolationError(
                    f"{side} correspondences {coords.shape} do not match scores {scores.shape}"
                )
            if not (np.all(scores > 0.0) and np.all(scores < 1.0)):
                raise ContractViolationError(f"{side} overlap scores must lie in (0, 1)")


def decode(features: Matrix, head: DecoderWeights) -> tuple[Matrix, np.ndarray]:
    """Counterpart coordinates from the two-layer MLP and clamped sigmoid overlap scores."""
    if features.ndim != 2 or features.shape[1] != head.overlap_w.shape[0]:
        raise ContractViolationError(
            f"features {features.shape} do not match decoder width {head.overlap_w.shape[0]}"
        )
    coords = head.coords(features)
    scores = sigmoid(linear_forward(features, head.overlap_w, head.overlap_b)).reshape(-1)
    return coords, scores


def decode_pair(features_x: Matrix, features_y: Matrix, head: DecoderWeights) -> Correspondences:
    coords_x, scores_x = decode(features_x, head)
    coords_y, scores_y = decode(features_y, head)
    return Correspondences(coords_x, coords_y, scores_x, scores_y)


def oracle_correspondences(
    source: PointCloud, target: PointCloud, gt: RigidTransform, overlap_radius: float
) -> Correspondences:
    """Ground-truth stand-in for the learned heads.

    Each point's counterpart is the nearest point of the other cloud to its
    ground-truth image; scores are the overlap labels pulled into (0, 1).
    """
    idx_x, _ = nearest_neighbors(gt.apply(source.points), target.points)
    idx_y, _ = nearest_neighbors(gt.inverse().apply(target.points), source.points)
    labels_x = overlap_labels(source, target, gt, overlap_radius)
    labels_y = overlap_labels(target, source, gt.inverse(), overlap_radius)
    clamp = (PROBABILITY_EPS, 1.0 - PROBABILITY_EPS)
    return Correspondences(
        target.points[idx_x],
        source.points[idx_y],
        np.clip(labels_x, *clamp),
        np.clip(labels_y, *clamp),
    )
