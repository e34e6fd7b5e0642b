"""Registration pipeline: load, embed, tree, encode, decode, estimate, metrics."""

from __future__ import annotations

from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import structlog

from pttreg.attention.io import load_bundle
from pttreg.attention.weights import ModelWeights, ParameterBundle, init_bundle, model_specs
from pttreg.config import RunConfig
from pttreg.core.state import (
    LossBreakdown,
    RegistrationMetrics,
    RegistrationReport,
    ScoreSummary,
    TransformReport,
)
from pttreg.geometry.cloud import PointCloud
from pttreg.geometry.io import load_cloud, load_transform
from pttreg.geometry.transform import RigidTransform
from pttreg.geometry.tree import build_tree, tree_stats
from pttreg.numerics.linalg import Matrix
from pttreg.pta.encoder import TreeEncoder
from pttreg.registration.decoder import Correspondences, decode_pair, oracle_correspondences
from pttreg.registration.losses import compute_losses
from pttreg.registration.metrics import metrics
from pttreg.registration.procrustes import estimate_transform
from pttreg.utils.exceptions import ConfigError, PttregError, StageError

log = structlog.get_logger()


@contextmanager
def stage(name: str) -> Iterator[None]:
    """Tag any pttreg error raised inside the block with the stage name."""
    log.debug("stage_started", stage=name)
    try:
        yield
    except StageError:
        raise
    except PttregError as exc:
        log.error("stage_failed", stage=name, error=str(exc))
        raise StageError(name, exc) from exc
    log.debug("stage_completed", stage=name)


def summarize_scores(scores: np.ndarray) -> ScoreSummary:
    return ScoreSummary(
        count=int(scores.shape[0]),
        min=float(scores.min()),
        mean=float(scores.mean()),
        max=float(scores.max()),
    )


def transform_report(t: RigidTransform) -> TransformReport:
    return TransformReport(
        rotation=[float(v) for v in t.rotation.reshape(-1)],
        translation=[float(v) for v in t.translation],
    )


@dataclass(frozen=True, slots=True)
class RegistrationResult:
    """Full in-memory result; ``report`` is what the CLI serialises."""

    report: RegistrationReport
    transform: RigidTransform
    correspondences: Correspondences


class RegistrationPipeline:
    """Registers a source cloud onto a target cloud.

    Without ``oracle`` the seeded (or loaded) model embeds both clouds,
    builds their trees, runs the tree transformer encoder and decodes
    counterparts and overlap scores. With ``oracle`` the learned heads are
    replaced by ground-truth correspondences so the geometry path can be
    checked on its own.
    """

    def __init__(self, config: RunConfig, bundle: ParameterBundle | None = None) -> None:
        self._config = config
        self._bundle = bundle

    def _weights(self) -> ModelWeights:
        cfg = self._config
        bundle = self._bundle
        if bundle is None:
            if cfg.weights_path is not None:
                bundle = load_bundle(cfg.weights_path, model_specs(cfg.model, cfg.tree.layers))
            else:
                bundle = init_bundle(cfg.model, cfg.tree.layers, cfg.seed)
        return ModelWeights.from_bundle(bundle, cfg.model, cfg.tree.layers)

    @staticmethod
    def _embed(points: Matrix, weights: ModelWeights) -> Matrix:
        return weights.embed(points - points.mean(axis=0))

    def run(
        self,
        source: PointCloud,
        target: PointCloud,
        gt: RigidTransform | None = None,
        *,
        oracle: bool = False,
    ) -> RegistrationResult:
        """Estimate the transform taking source onto target.

        Raises:
            ConfigError: If ``oracle`` is set without a ground truth.
            StageError: Wrapping any failure with its stage name.
        """
        cfg = self._config
        if oracle and gt is None:
            raise ConfigError("the oracle decoder needs a ground-truth transform")
        log.info("registration_started", source=source.id, target=target.id, oracle=oracle)

        weights: ModelWeights | None = None
        if not oracle:
            with stage("embed"):
                weights = self._weights()
                feats_x = self._embed(source.points, weights)
                feats_y = self._embed(target.points, weights)

        with stage("tree"):
            tree_x = build_tree(source, cfg.tree)
            tree_y = build_tree(target, cfg.tree)
            stats_x = tree_stats(tree_x, cfg.tree.leaf_cap)
            stats_y = tree_stats(tree_y, cfg.tree.leaf_cap)

        key_evaluations = 0
        if weights is not None:
            with stage("encode"):
                encoded = TreeEncoder(cfg.model, cfg.tree, weights).encode(
                    tree_x, tree_y, feats_x, feats_y
                )
                key_evaluations = encoded.key_evaluations

        with stage("decode"):
            if weights is None:
                assert gt is not None
                corr = oracle_correspondences(source, target, gt, cfg.loss.overlap_radius)
            else:
                corr = decode_pair(encoded.features_x, encoded.features_y, weights.decoder)

        with stage("estimate"):
            estimate = estimate_transform(source.points, target.points, corr)
            log.info("procrustes_solved", translation=estimate.translation.tolist())

        result_metrics: RegistrationMetrics | None = None
        losses: LossBreakdown | None = None
        if gt is not None:
            with stage("metrics"):
                result_metrics = metrics(estimate, gt, source.points, target.points, cfg.thresholds)
                if weights is not None:
                    losses = compute_losses(
                        source, target, gt,
                        encoded.features_x, encoded.features_y,
                        corr, weights.w_f, cfg.loss,
                    )

        report = RegistrationReport(
            source=source.id,
            target=target.id,
            seed=cfg.seed,
            oracle=oracle,
            transform=transform_report(estimate),
            overlap_scores_source=summarize_scores(corr.scores_x),
            overlap_scores_target=summarize_scores(corr.scores_y),
            tree_source=stats_x,
            tree_target=stats_y,
            key_evaluations=key_evaluations,
            metrics=result_metrics,
            losses=losses,
        )
        log.info("registration_done", key_evaluations=key_evaluations)
        return RegistrationResult(report, estimate, corr)

    def run_files(
        self,
        source_path: str | Path,
        target_path: str | Path,
        gt_path: str | Path | None = None,
        *,
        oracle: bool = False,
    ) -> RegistrationResult:
        """Load clouds (and the optional ground truth), then run."""
        with stage("load"):
            source = load_cloud(source_path)
            target = load_cloud(target_path)
            gt = load_transform(gt_path) if gt_path is not None else None
        return self.run(source, target, gt, oracle=oracle)
