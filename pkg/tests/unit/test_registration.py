"""Unit tests for decoding, losses, rigid estimation and metrics."""

from __future__ import annotations

import math

import numpy as np
import pytest

from pttreg.attention.weights import DecoderWeights, MlpWeights
from pttreg.config import LossConfig, MetricThresholds
from pttreg.core.state import RegistrationMetrics
from pttreg.geometry.cloud import PointCloud
from pttreg.geometry.neighbors import pairwise_sq_distances
from pttreg.geometry.transform import RigidTransform, axis_angle_rotation, random_transform
from pttreg.registration.decoder import Correspondences, decode, decode_pair, oracle_correspondences
from pttreg.registration.labels import overlap_labels
from pttreg.registration.losses import (
    compute_losses,
    loss_correspondence,
    loss_feature,
    loss_overlap,
    loss_total,
)
from pttreg.registration.metrics import chamfer_distance, metrics, registration_recall, rotation_error_deg
from pttreg.registration.procrustes import estimate_transform, weighted_procrustes
from pttreg.utils.exceptions import ConfigError, ContractViolationError, DegenerateGeometryError


def _zero_head(d: int) -> DecoderWeights:
    mlp = MlpWeights(np.zeros((d, d)), np.zeros((1, d)), np.zeros((d, 3)), np.zeros((1, 3)))
    return DecoderWeights(mlp, np.zeros((d, 1)), np.zeros((1, 1)))


def _rotation_z(deg: float) -> RigidTransform:
    return RigidTransform(axis_angle_rotation([0.0, 0.0, 1.0], math.radians(deg)), np.zeros(3))


class TestDecoder:
    """Tests for the correspondence and overlap heads."""

    def test_zero_weights(self, rng: np.random.Generator) -> None:
        """Zero heads give zero coordinates and even overlap odds."""
        coords, scores = decode(rng.normal(size=(5, 12)), _zero_head(12))
        np.testing.assert_array_equal(coords, np.zeros((5, 3)))
        np.testing.assert_array_equal(scores, np.full(5, 0.5))

    def test_pair_shapes(self, rng: np.random.Generator) -> None:
        """Each cloud gets one counterpart and one score per point."""
        corr = decode_pair(rng.normal(size=(4, 12)), rng.normal(size=(6, 12)), _zero_head(12))
        assert corr.counterpart_x.shape == (4, 3)
        assert corr.scores_y.shape == (6,)

    def test_width_mismatch(self, rng: np.random.Generator) -> None:
        """Features must match the head width."""
        with pytest.raises(ContractViolationError):
            decode(rng.normal(size=(2, 6)), _zero_head(12))

    def test_scores_must_be_open_interval(self) -> None:
        """Scores of exactly 0 or 1 are rejected."""
        with pytest.raises(ContractViolationError):
            Correspondences(np.zeros((1, 3)), np.zeros((1, 3)), np.array([1.0]), np.array([0.5]))

    def test_oracle_on_noiseless_pair(self, cloud_pair) -> None:
        """The oracle returns exact gt images and near-certain scores."""
        src, dst, gt = cloud_pair
        corr = oracle_correspondences(src, dst, gt, 0.2)
        np.testing.assert_allclose(corr.counterpart_x, gt.apply(src.points), atol=1e-12)
        assert np.all(corr.scores_x > 0.999)


class TestOverlapLabels:
    """Tests for ground-truth overlap labels."""

    def test_identical_clouds(self, rng: np.random.Generator) -> None:
        """A cloud fully overlaps itself."""
        cloud = PointCloud(rng.uniform(size=(30, 3)))
        labels = overlap_labels(cloud, cloud, RigidTransform.identity(), 0.01)
        np.testing.assert_array_equal(labels, np.ones(30))

    def test_displaced_target(self, rng: np.random.Generator) -> None:
        """A target far outside the radius has no overlap."""
        cloud = PointCloud(rng.uniform(size=(30, 3)))
        labels = overlap_labels(cloud, cloud.translated([10.0, 0.0, 0.0]), RigidTransform.identity(), 1.0)
        np.testing.assert_array_equal(labels, np.zeros(30))

    def test_matches_brute_force(self, rng: np.random.Generator) -> None:
        """Labels agree with an exhaustive distance check."""
        x, y = PointCloud(rng.uniform(size=(40, 3))), PointCloud(rng.uniform(size=(35, 3)))
        gt = random_transform(rng, 10.0, 0.1)
        labels = overlap_labels(x, y, gt, 0.1)
        expected = (pairwise_sq_distances(gt.apply(x.points), y.points).min(axis=1) < 0.01).astype(float)
        np.testing.assert_array_equal(labels, expected)

    def test_radius_must_be_positive(self) -> None:
        """A zero radius is a configuration error."""
        cloud = PointCloud(np.zeros((1, 3)))
        with pytest.raises(ConfigError):
            overlap_labels(cloud, cloud, RigidTransform.identity(), 0.0)


class TestLosses:
    """Tests for the forward loss terms."""

    def test_overlap_at_labels(self) -> None:
        """Scores equal to the labels cost almost nothing."""
        labels = np.array([1.0, 0.0, 1.0])
        assert loss_overlap(labels, labels) <= 2e-7

    def test_overlap_even_odds(self) -> None:
        """Scores of one half cost ln 2."""
        assert loss_overlap(np.array([1.0, 0.0]), np.array([0.5, 0.5])) == pytest.approx(math.log(2.0))

    def test_correspondence_exact(self, rng: np.random.Generator) -> None:
        """Perfect predictions cost zero."""
        x = rng.normal(size=(5, 3))
        gt = random_transform(rng)
        term = loss_correspondence(x, gt.apply(x), np.ones(5), gt)
        assert term.value == pytest.approx(0.0, abs=1e-12)
        assert not term.degenerate

    def test_correspondence_l1(self) -> None:
        """A single positive off by 0.1 along x costs 0.1."""
        x = np.zeros((2, 3))
        predicted = np.array([[0.1, 0.0, 0.0], [5.0, 5.0, 5.0]])
        term = loss_correspondence(x, predicted, np.array([1.0, 0.0]), RigidTransform.identity())
        assert term.value == pytest.approx(0.1)

    def test_correspondence_translation_consistent(self, rng: np.random.Generator) -> None:
        """Shifting the ground truth and the predictions by one vector keeps the loss."""
        x = rng.normal(size=(20, 3))
        gt = random_transform(rng)
        predicted = gt.apply(x) + rng.normal(0.0, 0.05, size=(20, 3))
        labels = (rng.uniform(size=20) > 0.3).astype(np.float64)
        labels[0] = 1.0
        shift = np.array([3.0, -2.0, 0.5])
        moved = RigidTransform(gt.rotation, gt.translation + shift)
        base = loss_correspondence(x, predicted, labels, gt)
        shifted = loss_correspondence(x, predicted + shift, labels, moved)
        assert shifted.value == pytest.approx(base.value, rel=1e-9)

    def test_correspondence_without_overlap(self) -> None:
        """No positive labels reports zero with the degenerate flag."""
        term = loss_correspondence(np.zeros((2, 3)), np.ones((2, 3)), np.zeros(2), RigidTransform.identity())
        assert term.value == 0.0
        assert term.degenerate

    def test_feature_no_negatives(self) -> None:
        """A lone positive gives log 1."""
        pts = np.zeros((1, 3))
        f = np.ones((1, 4))
        term = loss_feature(f, f, pts, pts, RigidTransform.identity(), np.eye(4), 0.1, 0.5)
        assert term.value == pytest.approx(0.0, abs=1e-12)

    def test_feature_equal_negative(self) -> None:
        """One negative as similar as the positive gives ln 2."""
        x = np.zeros((1, 3))
        y = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
        term = loss_feature(np.ones((1, 4)), np.ones((2, 4)), x, y, RigidTransform.identity(), np.eye(4), 0.1, 0.5)
        assert term.value == pytest.approx(math.log(2.0))

    def test_feature_without_anchors(self) -> None:
        """No point within the positive radius reports zero with the flag."""
        term = loss_feature(
            np.ones((1, 4)), np.ones((1, 4)), np.zeros((1, 3)), np.full((1, 3), 5.0),
            RigidTransform.identity(), np.eye(4), 0.1, 0.5,
        )
        assert term.value == 0.0
        assert term.degenerate

    def test_total_weighting(self) -> None:
        """Parts (1, 2, 3) with default weights total 3.3."""
        assert loss_total(1.0, 2.0, 3.0, LossConfig()) == pytest.approx(3.3)
        assert loss_total(0.0, 0.0, 0.0, LossConfig()) == 0.0

    def test_compute_losses_on_oracle(self, cloud_pair, rng: np.random.Generator) -> None:
        """Oracle correspondences leave only the overlap floor and the feature term."""
        src, dst, gt = cloud_pair
        cfg = LossConfig()
        corr = oracle_correspondences(src, dst, gt, cfg.overlap_radius)
        fx, fy = rng.normal(size=(len(src), 6)), rng.normal(size=(len(dst), 6))
        losses = compute_losses(src, dst, gt, fx, fy, corr, np.eye(6), cfg)
        assert losses.correspondence == pytest.approx(0.0, abs=1e-9)
        assert losses.overlap <= 4e-7
        assert not losses.no_overlap
        assert losses.total == pytest.approx(losses.overlap + losses.correspondence + 0.1 * losses.feature)


class TestProcrustes:
    """Tests for weighted rigid alignment."""

    def test_identity(self, rng: np.random.Generator) -> None:
        """Identical sets give the identity."""
        src = rng.normal(size=(10, 3))
        t = weighted_procrustes(src, src, np.ones(10))
        np.testing.assert_allclose(t.rotation, np.eye(3), atol=1e-10)
        np.testing.assert_allclose(t.translation, np.zeros(3), atol=1e-10)

    def test_pure_translation(self, rng: np.random.Generator) -> None:
        """A shifted copy gives that shift."""
        src = rng.normal(size=(10, 3))
        t = weighted_procrustes(src, src + [1.0, 2.0, 3.0], np.ones(10))
        np.testing.assert_allclose(t.rotation, np.eye(3), atol=1e-10)
        np.testing.assert_allclose(t.translation, [1.0, 2.0, 3.0], atol=1e-10)

    def test_random_recovery(self) -> None:
        """Noiseless transforms are recovered for 100 random draws."""
        rng = np.random.default_rng(77)
        for _ in range(100):
            gt = random_transform(rng, 180.0, 5.0)
            src = rng.normal(size=(int(rng.integers(4, 40)), 3))
            est = weighted_procrustes(src, gt.apply(src), rng.uniform(0.1, 1.0, size=src.shape[0]))
            assert np.linalg.norm(est.rotation - gt.rotation) < 1e-6
            assert np.linalg.norm(est.translation - gt.translation) < 1e-8

    def test_weight_scale_invariance(self, rng: np.random.Generator) -> None:
        """Scaling every weight does not change the solution."""
        src, dst = rng.normal(size=(12, 3)), rng.normal(size=(12, 3))
        w = rng.uniform(size=12)
        a, b = weighted_procrustes(src, dst, w), weighted_procrustes(src, dst, 7.0 * w)
        np.testing.assert_allclose(a.rotation, b.rotation, atol=1e-12)

    def test_zero_weight_rows_are_ignored(self, rng: np.random.Generator) -> None:
        """Rows with weight zero do not affect the fit."""
        src, dst = rng.normal(size=(8, 3)), rng.normal(size=(8, 3))
        w = rng.uniform(0.1, 1.0, size=8)
        base = weighted_procrustes(src, dst, w)
        padded = weighted_procrustes(
            np.vstack([src, rng.normal(size=(4, 3))]),
            np.vstack([dst, rng.normal(size=(4, 3))]),
            np.concatenate([w, np.zeros(4)]),
        )
        np.testing.assert_allclose(padded.rotation, base.rotation, atol=1e-10)
        np.testing.assert_allclose(padded.translation, base.translation, atol=1e-10)

    def test_collinear_is_degenerate(self) -> None:
        """Points on a line do not fix a rotation."""
        src = np.outer(np.arange(5.0), [1.0, 0.0, 0.0])
        with pytest.raises(DegenerateGeometryError):
            weighted_procrustes(src, src, np.ones(5))

    def test_zero_weights_are_degenerate(self, rng: np.random.Generator) -> None:
        """All-zero weights cannot be normalised."""
        src = rng.normal(size=(5, 3))
        with pytest.raises(DegenerateGeometryError):
            weighted_procrustes(src, src, np.zeros(5))

    def test_contract_violations(self, rng: np.random.Generator) -> None:
        """Too few points or negative weights are rejected."""
        with pytest.raises(ContractViolationError):
            weighted_procrustes(np.zeros((2, 3)), np.zeros((2, 3)), np.ones(2))
        with pytest.raises(ContractViolationError):
            weighted_procrustes(rng.normal(size=(4, 3)), rng.normal(size=(4, 3)), np.array([1.0, -1.0, 1.0, 1.0]))

    def test_estimate_from_perfect_correspondences(self, cloud_pair) -> None:
        """Exact counterparts in both directions recover the ground truth."""
        src, dst, gt = cloud_pair
        corr = Correspondences(
            gt.apply(src.points), gt.inverse().apply(dst.points), np.full(len(src), 0.9), np.full(len(dst), 0.9)
        )
        est = estimate_transform(src.points, dst.points, corr)
        np.testing.assert_allclose(est.rotation, gt.rotation, atol=1e-8)
        np.testing.assert_allclose(est.translation, gt.translation, atol=1e-8)

    def test_weights_suppress_noisy_pairs(self) -> None:
        """Down-weighting the noisy pairs beats a uniform solve in each of 100 trials."""
        rng = np.random.default_rng(17)

        def error(est: RigidTransform, gt: RigidTransform) -> float:
            return float(np.linalg.norm(est.rotation - gt.rotation) + np.linalg.norm(est.translation - gt.translation))

        noisy = np.arange(60) < 15
        scores = np.where(noisy, 0.01, 0.99)
        uniform = np.full(60, 0.5)
        for _ in range(100):
            gt = random_transform(rng)
            src, dst = rng.uniform(-1.0, 1.0, size=(60, 3)), rng.uniform(-1.0, 1.0, size=(60, 3))
            cx = gt.apply(src) + np.where(noisy[:, None], rng.normal(0.0, 0.01, size=(60, 3)), 0.0)
            cy = gt.inverse().apply(dst) + np.where(noisy[:, None], rng.normal(0.0, 0.01, size=(60, 3)), 0.0)
            weighted = estimate_transform(src, dst, Correspondences(cx, cy, scores, scores))
            plain = estimate_transform(src, dst, Correspondences(cx, cy, uniform, uniform))
            assert error(weighted, gt) <= error(plain, gt)


class TestMetrics:
    """Tests for registration metrics and recall."""

    def test_exact_estimate(self, cloud_pair) -> None:
        """An exact estimate has zero error."""
        src, dst, gt = cloud_pair
        m = metrics(gt, gt, src.points, dst.points, MetricThresholds())
        assert m.rre_deg == pytest.approx(0.0, abs=1e-6)
        assert m.rte == 0.0
        assert m.chamfer == pytest.approx(0.0, abs=1e-20)
        assert m.success and m.success_rmse

    def test_quarter_turn(self) -> None:
        """A 90 degree error about z is reported as 90 degrees."""
        assert rotation_error_deg(_rotation_z(90.0).rotation, np.eye(3)) == pytest.approx(90.0)

    def test_half_turn(self) -> None:
        """The error stays accurate at 180 degrees."""
        assert rotation_error_deg(_rotation_z(180.0).rotation, np.eye(3)) == pytest.approx(180.0)

    @pytest.mark.parametrize(("angle", "expected"), [(4.0, True), (6.0, False)])
    def test_success_thresholds(self, angle: float, expected: bool) -> None:
        """Success needs rotation under 5 degrees and translation under 2."""
        est = RigidTransform(_rotation_z(angle).rotation, np.array([1.0, 0.0, 0.0]))
        pts = np.eye(3)
        m = metrics(est, RigidTransform.identity(), pts, pts, MetricThresholds())
        assert m.success is expected

    def test_chamfer_hand_example(self) -> None:
        """Directional means of 1 and 5 average to 3."""
        a = np.zeros((1, 3))
        b = np.array([[1.0, 0.0, 0.0], [3.0, 0.0, 0.0]])
        assert chamfer_distance(a, b) == 3.0
        assert chamfer_distance(b, a) == 3.0

    def test_chamfer_ignores_point_order(self, rng: np.random.Generator) -> None:
        """Shuffling either cloud leaves the distance unchanged."""
        a, b = rng.normal(size=(40, 3)), rng.normal(size=(30, 3))
        shuffled = chamfer_distance(a[rng.permutation(40)], b[rng.permutation(30)])
        assert shuffled == pytest.approx(chamfer_distance(a, b), rel=1e-12)
        assert chamfer_distance(a, a[rng.permutation(40)]) == 0.0

    def test_rotation_error_is_symmetric(self) -> None:
        """RRE(A, B) equals RRE(B, A) and RRE(A, A) is zero."""
        rng = np.random.default_rng(5)
        for _ in range(100):
            a, b = random_transform(rng).rotation, random_transform(rng).rotation
            assert rotation_error_deg(a, b) == pytest.approx(rotation_error_deg(b, a), abs=1e-9)
            assert rotation_error_deg(a, a) == pytest.approx(0.0, abs=1e-9)

    def test_recall(self) -> None:
        """Recall is the fraction of successes with median errors."""
        def result(rre: float, ok: bool) -> RegistrationMetrics:
            return RegistrationMetrics(rre_deg=rre, rte=0.5, rmse=0.1, chamfer=0.0, success=ok, success_rmse=True)

        summary = registration_recall([result(1.0, True), result(9.0, False), result(3.0, True)])
        assert summary.pairs == 3
        assert summary.recall == pytest.approx(2 / 3)
        assert summary.median_rre_deg == 3.0

    def test_recall_needs_results(self) -> None:
        """An empty list has no recall."""
        with pytest.raises(ContractViolationError):
            registration_recall([])
