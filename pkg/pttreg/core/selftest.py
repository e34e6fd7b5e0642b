"""Built-in self-test suites run by ``pttreg selftest``.

Every suite uses internal seeded fixtures only, so the result never depends
on files or weights on disk.
"""

from __future__ import annotations

from collections.abc import Callable

import numpy as np
import structlog

from pttreg.attention.mha import multihead_attention, ragged_multihead_attention
from pttreg.attention.weights import MhaWeights
from pttreg.config import TreeConfig
from pttreg.constants import STREAM_SELFTEST
from pttreg.core.state import SelfTestCheck, SelfTestReport
from pttreg.geometry.cloud import PointCloud
from pttreg.geometry.transform import random_transform
from pttreg.geometry.tree import build_tree
from pttreg.numerics.linalg import segment_offsets
from pttreg.numerics.rng import make_rng
from pttreg.pta.pooling import feature_pooling
from pttreg.pta.regions import AttendedRegions, check_region_soundness
from pttreg.pta.tree_attention import count_attended_keys, pta_forward
from pttreg.registration.procrustes import weighted_procrustes
from pttreg.utils.exceptions import PttregError

log = structlog.get_logger()

EQUIVALENCE_SEEDS = 100
PROCRUSTES_TRIALS = 100
TREE_CLOUDS = 1000
EQUIVALENCE_TOL = 1e-10


def _relative_error(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1.0)))


def check_dense_equivalence() -> str:
    """Single-layer trees and full regions must reproduce dense attention."""
    one_layer = TreeConfig(layers=1)
    worst = 0.0
    for seed in range(EQUIVALENCE_SEEDS):
        rng = make_rng(seed, STREAM_SELFTEST, 0)
        n_q, n_k = rng.integers(1, 24, size=2)
        x = PointCloud(rng.uniform(size=(n_q, 3)))
        y = PointCloud(rng.uniform(size=(n_k, 3)))
        fx, fy = rng.normal(size=(n_q, 12)), rng.normal(size=(n_k, 12))
        w = MhaWeights.random(12, 2, seed)
        dense = multihead_attention(fx, fy, w)

        tx, ty = build_tree(x, one_layer), build_tree(y, one_layer)
        out = pta_forward(tx, ty, feature_pooling(tx, fx, None), feature_pooling(ty, fy, None), w, 1)
        full = ragged_multihead_attention(
            fx, fy, segment_offsets(np.full(n_q, n_k)), np.tile(np.arange(n_k), n_q), w
        )
        for candidate in (out.features_q, full.features):
            err = _relative_error(candidate, dense.features)
            if err > EQUIVALENCE_TOL:
                raise AssertionError(f"seed {seed}: relative error {err:.3e}")
            worst = max(worst, err)
    return f"{EQUIVALENCE_SEEDS} seeds, max relative error {worst:.2e}"


def check_procrustes_recovery() -> str:
    """Noiseless random transforms must be recovered exactly."""
    worst_r = worst_t = 0.0
    for trial in range(PROCRUSTES_TRIALS):
        rng = make_rng(trial, STREAM_SELFTEST, 1)
        gt = random_transform(rng, 180.0, 2.0)
        src = rng.normal(size=(int(rng.integers(4, 40)), 3))
        est = weighted_procrustes(src, gt.apply(src), rng.uniform(0.1, 1.0, size=src.shape[0]))
        err_r = float(np.linalg.norm(est.rotation - gt.rotation))
        err_t = float(np.linalg.norm(est.translation - gt.translation))
        if err_r >= 1e-6 or err_t >= 1e-8 or abs(np.linalg.det(est.rotation) - 1.0) > 1e-8:
            raise AssertionError(f"trial {trial}: rotation error {err_r:.2e}, translation error {err_t:.2e}")
        worst_r, worst_t = max(worst_r, err_r), max(worst_t, err_t)
    return f"{PROCRUSTES_TRIALS} transforms, max errors R {worst_r:.2e} t {worst_t:.2e}"


def check_tree_invariants() -> str:
    """Partition, child-mean and determinism invariants on random clouds."""
    for seed in range(TREE_CLOUDS):
        rng = make_rng(seed, STREAM_SELFTEST, 2)
        cloud = PointCloud(rng.uniform(-1.0, 1.0, size=(int(rng.integers(1, 400)), 3)))
        cfg = TreeConfig(layers=int(rng.integers(1, 5)), leaf_voxel_size=float(rng.uniform(0.05, 0.5)))
        tree = build_tree(cloud, cfg)
        tree.validate()
        again = build_tree(cloud, cfg)
        if any(not np.array_equal(a, b) for a, b in zip(tree.coords, again.coords)):
            raise AssertionError(f"seed {seed}: rebuilding the tree changed its coordinates")
    return f"{TREE_CLOUDS} random clouds"


def _faulty(regions: AttendedRegions, key_parent: np.ndarray) -> AttendedRegions:
    """Add to query 0 a key whose parent was not selected for it."""
    allowed = regions.selected[int(regions.query_parent[0])]
    outside = np.flatnonzero(~np.isin(key_parent, allowed))
    if outside.shape[0] == 0:
        raise AssertionError("fixture selects every coarse key; no fault can be injected")
    return regions.with_extra_key(0, int(outside[0]))


def check_region_soundness_suite(inject_fault: bool = False) -> str:
    """Attended keys must descend from the selected coarse keys, and counts must recount."""
    rng = make_rng(0, STREAM_SELFTEST, 3)
    cfg = TreeConfig(layers=3, leaf_voxel_size=0.1, top_s=2)
    x = PointCloud(rng.uniform(size=(300, 3)))
    y = PointCloud(rng.uniform(size=(300, 3)))
    tx, ty = build_tree(x, cfg), build_tree(y, cfg)
    fx, fy = rng.normal(size=(300, 12)), rng.normal(size=(300, 12))
    out = pta_forward(
        tx, ty, feature_pooling(tx, fx, None), feature_pooling(ty, fy, None),
        MhaWeights.random(12, 2, 0), cfg.top_s,
    )
    if count_attended_keys(out) != out.key_evaluations:
        raise AssertionError("key evaluation counter disagrees with the recount")
    for layer in range(1, tx.layers):
        regions = out.regions_q[layer]
        assert regions is not None
        key_parent = ty.parent_index[layer]
        if inject_fault and layer == tx.layers - 1:
            regions = _faulty(regions, key_parent)
        check_region_soundness(regions, key_parent)
    return f"{tx.layers - 1} layers, {out.key_evaluations} key evaluations"


def run_selftest(inject_region_fault: bool = False) -> SelfTestReport:
    """Run every suite; a suite fails on any assertion or pttreg error."""
    suites: list[tuple[str, Callable[[], str]]] = [
        ("dense_equivalence", check_dense_equivalence),
        ("procrustes_recovery", check_procrustes_recovery),
        ("tree_invariants", check_tree_invariants),
        ("region_soundness", lambda: check_region_soundness_suite(inject_region_fault)),
    ]
    checks: list[SelfTestCheck] = []
    for name, suite in suites:
        try:
            detail = suite()
            checks.append(SelfTestCheck(name=name, passed=True, detail=detail))
        except (AssertionError, PttregError) as exc:
            log.warning("selftest_failed", check=name, error=str(exc))
            checks.append(SelfTestCheck(name=name, passed=False, detail=str(exc)))
    return SelfTestReport(all_passed=all(c.passed for c in checks), checks=checks)
