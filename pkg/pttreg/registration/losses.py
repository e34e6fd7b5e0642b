"""Forward evaluation of the overlap, correspondence and feature losses."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pttreg.config import LossConfig
from pttreg.constants import NN_BLOCK_PAIRS, PROBABILITY_EPS
from pttreg.core.state import LossBreakdown
from pttreg.geometry.cloud import PointCloud
from pttreg.geometry.neighbors import nearest_neighbors, pairwise_sq_distances
from pttreg.geometry.transform import RigidTransform
from pttreg.numerics.linalg import Matrix
from pttreg.registration.decoder import Correspondences
from pttreg.registration.labels import overlap_labels
from pttreg.utils.exceptions import ContractViolationError


@dataclass(frozen=True, slots=True)
class LossTerm:
    """A loss value; ``degenerate`` marks the 0/0 case reported as 0."""

    value: float
    degenerate: bool = False

    def __add__(self, other: LossTerm) -> LossTerm:
        return LossTerm(self.value + other.value, self.degenerate or other.degenerate)


def loss_overlap(labels: np.ndarray, scores: np.ndarray) -> float:
    """Mean binary cross-entropy between labels and clamped scores."""
    labels = np.asarray(labels, dtype=np.float64).reshape(-1)
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if labels.shape != scores.shape or labels.shape[0] == 0:
        raise ContractViolationError(f"{labels.shape[0]} labels for {scores.shape[0]} scores")
    s = np.clip(scores, PROBABILITY_EPS, 1.0 - PROBABILITY_EPS)
    return float(-np.mean(labels * np.log(s) + (1.0 - labels) * np.log1p(-s)))


def loss_correspondence(
    x: Matrix, predicted: Matrix, labels: np.ndarray, gt: RigidTransform
) -> LossTerm:
    """Mean L1 (sum of absolute coordinate differences) over overlapping points."""
    if predicted.shape != x.shape or labels.shape != (x.shape[0],):
        raise ContractViolationError(
            f"points {x.shape}, predictions {predicted.shape} and labels {labels.shape} disagree"
        )
    positive = labels > 0.5
    if not np.any(positive):
        return LossTerm(0.0, degenerate=True)
    residual = np.abs(gt.apply(x[positive]) - predicted[positive]).sum(axis=1)
    return LossTerm(float(residual.mean()))


def loss_feature(
    feats_x: Matrix,
    feats_y: Matrix,
    x: Matrix,
    y: Matrix,
    gt: RigidTransform,
    w_f: Matrix,
    positive_radius: float,
    negative_radius: float,
) -> LossTerm:
    """Contrastive loss on bilinear similarities ``f_xᵀ W_f f_c``.

    Anchors are points of x whose nearest point of y (after gt) is within
    the positive radius; that point is the positive. Negatives are points of
    y farther than the negative radius from the anchor's gt position.
    """
    if feats_x.shape[0] != x.shape[0] or feats_y.shape[0] != y.shape[0]:
        raise ContractViolationError("features are not aligned with points")
    if w_f.shape != (feats_x.shape[1], feats_y.shape[1]):
        raise ContractViolationError(f"W_f has shape {w_f.shape}")
    moved = gt.apply(x)
    nearest, dist2 = nearest_neighbors(moved, y)
    anchors = np.flatnonzero(dist2 <= positive_radius**2)
    if anchors.shape[0] == 0:
        return LossTerm(0.0, degenerate=True)

    projected = feats_x @ w_f
    block = max(1, NN_BLOCK_PAIRS // y.shape[0])
    total = 0.0
    for start in range(0, anchors.shape[0], block):
        a = anchors[start : start + block]
        logits = projected[a] @ feats_y.T
        positive = logits[np.arange(a.shape[0]), nearest[a]]
        negative = np.where(
            pairwise_sq_distances(moved[a], y) > negative_radius**2, logits, -np.inf
        )
        top = np.maximum(positive, negative.max(axis=1))
        lse = top + np.log(np.exp(positive - top) + np.exp(negative - top[:, None]).sum(axis=1))
        total += float((lse - positive).sum())
    return LossTerm(total / anchors.shape[0])


def correspondence_loss_pair(
    source: PointCloud,
    target: PointCloud,
    corr: Correspondences,
    labels_x: np.ndarray,
    labels_y: np.ndarray,
    gt: RigidTransform,
) -> LossTerm:
    """Correspondence loss summed over both prediction directions."""
    return loss_correspondence(source.points, corr.counterpart_x, labels_x, gt) + loss_correspondence(
        target.points, corr.counterpart_y, labels_y, gt.inverse()
    )


def feature_loss_pair(
    source: PointCloud,
    target: PointCloud,
    feats_x: Matrix,
    feats_y: Matrix,
    gt: RigidTransform,
    w_f: Matrix,
    cfg: LossConfig,
) -> LossTerm:
    """Feature loss with anchors taken from each cloud in turn."""
    forward = loss_feature(
        feats_x, feats_y, source.points, target.points, gt, w_f,
        cfg.positive_radius, cfg.negative_radius,
    )
    backward = loss_feature(
        feats_y, feats_x, target.points, source.points, gt.inverse(), w_f,
        cfg.positive_radius, cfg.negative_radius,
    )
    return forward + backward


def loss_total(overlap: float, correspondence: float, feature: float, cfg: LossConfig) -> float:
    return overlap + cfg.lambda_c * correspondence + cfg.lambda_f * feature


def compute_losses(
    source: PointCloud,
    target: PointCloud,
    gt: RigidTransform,
    feats_x: Matrix,
    feats_y: Matrix,
    corr: Correspondences,
    w_f: Matrix,
    cfg: LossConfig,
) -> LossBreakdown:
    """Evaluate every loss term for one registered pair."""
    labels_x = overlap_labels(source, target, gt, cfg.overlap_radius)
    labels_y = overlap_labels(target, source, gt.inverse(), cfg.overlap_radius)
    overlap = loss_overlap(labels_x, corr.scores_x) + loss_overlap(labels_y, corr.scores_y)
    corr_term = correspondence_loss_pair(source, target, corr, labels_x, labels_y, gt)
    feat_term = feature_loss_pair(source, target, feats_x, feats_y, gt, w_f, cfg)
    return LossBreakdown(
        overlap=overlap,
        correspondence=corr_term.value,
        feature=feat_term.value,
        total=loss_total(overlap, corr_term.value, feat_term.value, cfg),
        no_overlap=corr_term.degenerate,
        no_anchors=feat_term.degenerate,
    )
