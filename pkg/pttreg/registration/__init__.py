"""Decoder heads, overlap labels, losses, weighted Procrustes and metrics."""

from pttreg.registration.decoder import Correspondences, decode, decode_pair, oracle_correspondences
from pttreg.registration.labels import overlap_labels
from pttreg.registration.losses import (
    LossTerm,
    compute_losses,
    correspondence_loss_pair,
    feature_loss_pair,
    loss_correspondence,
    loss_feature,
    loss_overlap,
    loss_total,
)
from pttreg.registration.metrics import (
    chamfer_distance,
    metrics,
    registration_recall,
    rotation_error_deg,
    translation_error,
)
from pttreg.registration.procrustes import estimate_transform, weighted_procrustes

__all__ = [
    "Correspondences",
    "LossTerm",
    "chamfer_distance",
    "compute_losses",
    "correspondence_loss_pair",
    "decode",
    "decode_pair",
    "estimate_transform",
    "feature_loss_pair",
    "loss_correspondence",
    "loss_feature",
    "loss_overlap",
    "loss_total",
    "metrics",
    "oracle_correspondences",
    "overlap_labels",
    "registration_recall",
    "rotation_error_deg",
    "translation_error",
]
