"""Unit tests for the complexity sweep."""

from __future__ import annotations

import csv
import io

import numpy as np
import pytest

from pttreg.bench.sweep import fit_slope, leaf_voxel_size, report_to_csv, run_sweep, work_bound
from pttreg.config import BenchConfig, TreeConfig
from pttreg.core.state import Mechanism, TreeStats
from pttreg.utils.exceptions import ConfigError


@pytest.fixture
def small_bench() -> BenchConfig:
    """Four small sizes with a narrow model."""
    return BenchConfig(sizes=[100, 200, 300, 400], d_model=12, heads=2)


class TestFitSlope:
    """Tests for the log-log least-squares fit."""

    def test_linear_counts(self) -> None:
        """c*N has slope 1."""
        sizes = [1000, 2000, 4000, 8000]
        fit = fit_slope(sizes, [7 * n for n in sizes])
        assert fit.slope == pytest.approx(1.0, abs=1e-9)
        assert fit.r_squared == pytest.approx(1.0)

    def test_quadratic_counts(self) -> None:
        """c*N^2 has slope 2."""
        sizes = [100, 300, 500, 900]
        fit = fit_slope(sizes, [3 * n * n for n in sizes])
        assert fit.slope == pytest.approx(2.0, abs=1e-9)
        assert fit.intercept == pytest.approx(np.log(3.0), abs=1e-9)

    def test_matches_polyfit(self, rng: np.random.Generator) -> None:
        """The fit agrees with numpy's degree-1 polyfit on noisy data."""
        sizes = [100, 250, 700, 1500, 4000]
        counts = [int(n**1.3 * rng.uniform(0.8, 1.2)) for n in sizes]
        slope, intercept = np.polyfit(np.log(sizes), np.log(counts), 1)
        fit = fit_slope(sizes, counts)
        assert fit.slope == pytest.approx(slope, rel=1e-9)
        assert fit.intercept == pytest.approx(intercept, rel=1e-9)

    @pytest.mark.parametrize(
        ("sizes", "counts"),
        [
            ([1, 2, 3], [1, 2, 3]),
            ([1, 2, 3, 4], [1, 0, 3, 4]),
            ([5, 5, 5, 5], [1, 2, 3, 4]),
        ],
    )
    def test_rejects_bad_input(self, sizes: list[int], counts: list[int]) -> None:
        """Too few points, zero counts or one repeated size cannot be fitted."""
        with pytest.raises(ConfigError):
            fit_slope(sizes, counts)


class TestBound:
    """Tests for the work bound and leaf sizing."""

    def test_bound_from_stats(self) -> None:
        """Root product plus per-layer query count times S times key fan-out."""
        q = TreeStats(layer_counts=[2, 6, 20], max_children=[4, 5], root_count=2)
        k = TreeStats(layer_counts=[3, 7, 25], max_children=[3, 6], root_count=3)
        assert work_bound(q, k, 2) == 2 * 3 + 6 * 2 * 3 + 20 * 2 * 6

    def test_leaf_size_on_cube_sizes(self, small_bench: BenchConfig) -> None:
        """Sizes of 8*m^3 points get edge 1/m and exactly points_per_leaf per leaf."""
        for m in (2, 5, 10, 16):
            n = 8 * m**3
            assert leaf_voxel_size(n, small_bench) == pytest.approx(1.0 / m)
            assert n * leaf_voxel_size(n, small_bench) ** 3 == pytest.approx(small_bench.points_per_leaf)

    @pytest.mark.parametrize(("n", "cells"), [(1, 1), (100, 2), (2000, 6), (4000, 8), (16000, 13), (32000, 16)])
    def test_leaf_size_tiles_unit_cube(self, small_bench: BenchConfig, n: int, cells: int) -> None:
        """The edge is 1/m for the nearest integer m, so the grid tiles the cube."""
        assert leaf_voxel_size(n, small_bench) == 1.0 / cells

    def test_leaf_size_needs_points(self, small_bench: BenchConfig) -> None:
        """A size of zero is rejected."""
        with pytest.raises(ConfigError):
            leaf_voxel_size(0, small_bench)


class TestRunSweep:
    """Tests for the sweep driver."""

    def test_dense_counts_are_quadratic(self, small_bench: BenchConfig) -> None:
        """Dense attention evaluates every pair."""
        report = run_sweep(TreeConfig(layers=3), small_bench, seed=1, timing=False)
        dense = [t for t in report.trials if t.mechanism == Mechanism.dense]
        assert [t.key_evaluations for t in dense] == [n * n for n in small_bench.sizes]
        assert all(t.executed for t in dense)
        assert report.fits["dense"].slope == pytest.approx(2.0, abs=1e-9)

    def test_pta_counts_respect_bound(self, small_bench: BenchConfig) -> None:
        """Tree attention never exceeds its bound and recounts exactly."""
        report = run_sweep(TreeConfig(layers=3, top_s=2), small_bench, seed=1, timing=False)
        for t in report.trials:
            assert t.recounted_key_evaluations == t.key_evaluations
            if t.mechanism == Mechanism.pta:
                assert t.root_product <= t.key_evaluations <= t.bound
                assert t.tree_query is not None

    def test_single_layer_matches_dense(self, small_bench: BenchConfig) -> None:
        """A one-layer tree does the same work as dense attention."""
        report = run_sweep(TreeConfig(layers=1), small_bench, seed=1, timing=False)
        by_size: dict[int, dict[Mechanism, int]] = {}
        for t in report.trials:
            by_size.setdefault(t.size, {})[t.mechanism] = t.key_evaluations
        for n, counts in by_size.items():
            assert counts[Mechanism.pta] == counts[Mechanism.dense] == n * n

    def test_dense_above_cap_is_analytic(self) -> None:
        """Sizes beyond the dense cap are counted, not executed."""
        bench = BenchConfig(sizes=[100, 200, 300, 400], d_model=12, heads=2, dense_max_points=250)
        report = run_sweep(TreeConfig(layers=2), bench, seed=1, timing=False)
        dense = {t.size: t for t in report.trials if t.mechanism == Mechanism.dense}
        assert dense[200].executed and not dense[300].executed
        assert dense[400].key_evaluations == 160_000
        assert dense[400].seconds is None

    def test_deterministic_without_timing(self, small_bench: BenchConfig) -> None:
        """Untimed sweeps serialise identically."""
        a = run_sweep(TreeConfig(layers=2), small_bench, seed=3, timing=False)
        b = run_sweep(TreeConfig(layers=2), small_bench, seed=3, timing=False)
        assert a.model_dump_json() == b.model_dump_json()

    def test_parallel_matches_serial(self, small_bench: BenchConfig) -> None:
        """Threaded sizes give the same counts as a serial sweep."""
        serial = run_sweep(TreeConfig(layers=2), small_bench, seed=3, timing=False)
        threaded = run_sweep(TreeConfig(layers=2), small_bench, seed=3, timing=False, parallel=True)
        assert serial.model_dump_json() == threaded.model_dump_json()

    def test_csv_rows(self, small_bench: BenchConfig) -> None:
        """CSV output has a header and one row per trial."""
        report = run_sweep(TreeConfig(layers=2), small_bench, seed=3, timing=False)
        rows = list(csv.reader(io.StringIO(report_to_csv(report))))
        assert rows[0] == ["size", "mechanism", "key_evaluations", "seconds", "buffer_bytes", "executed"]
        assert len(rows) == 1 + len(report.trials)
        assert rows[1][:3] == ["100", "dense", "10000"]
        assert rows[1][3] == ""
