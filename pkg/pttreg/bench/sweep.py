"""Dense vs. tree attention work as the cloud size grows.

Each trial builds a seeded uniform cloud pair in the unit cube and runs one
cross-attention pass under each mechanism. Work is the exact number of
(query, key) evaluations; wall time and logit buffer bytes are recorded
alongside.
"""

from __future__ import annotations

import asyncio
import csv
import io
import time
from collections.abc import Sequence

import numpy as np
import structlog

from pttreg.attention.mha import multihead_attention
from pttreg.attention.weights import MhaWeights
from pttreg.config import BenchConfig, TreeConfig
from pttreg.constants import STREAM_BENCH
from pttreg.core.state import BenchReport, BenchTrial, Mechanism, SlopeFit, TreeStats
from pttreg.geometry.transform import uniform_cloud
from pttreg.geometry.tree import build_tree, tree_stats
from pttreg.numerics.rng import make_rng
from pttreg.pta.pooling import feature_pooling
from pttreg.pta.tree_attention import count_attended_keys, pta_forward
from pttreg.utils.exceptions import ConfigError, reraise_if_fatal

log = structlog.get_logger()


def leaf_voxel_size(size: int, bench: BenchConfig) -> float:
    """Leaf edge near ``points_per_leaf`` expected points per leaf, snapped to the unit cube.

    Uniform clouds in the unit cube hold N*V^3 points per leaf voxel. The edge
    is 1/m with m = round((N / points_per_leaf)^(1/3)), so the leaf grid
    tiles the cube exactly and no partial voxels appear at the faces.
    """
    if size < 1:
        raise ConfigError(f"cloud size must be positive, got {size}")
    cells = max(1, round((size / bench.points_per_leaf) ** (1.0 / 3.0)))
    return 1.0 / cells


def work_bound(stats_q: TreeStats, stats_k: TreeStats, top_s: int) -> int:
    """Upper bound on tree attention key evaluations from realised tree stats.

    The coarsest layers contribute N1q*N1k; every finer layer contributes
    its query count times S times the largest child list of the key layer
    above it (inner fan-out, or leaf occupancy for the densest layer).
    """
    q, k = stats_q.layer_counts, stats_k.layer_counts
    total = q[0] * k[0]
    for layer in range(1, len(q)):
        total += q[layer] * top_s * stats_k.max_children[layer - 1]
    return int(total)


def fit_slope(sizes: Sequence[int], counts: Sequence[int]) -> SlopeFit:
    """Ordinary least squares of ln(count) on ln(size).

    Raises:
        ConfigError: With fewer than 4 points or a non-positive value.
    """
    if len(sizes) != len(counts) or len(sizes) < 4:
        raise ConfigError(f"slope fit needs at least 4 paired points, got {len(sizes)}/{len(counts)}")
    if min(sizes) <= 0 or min(counts) <= 0:
        raise ConfigError("slope fit needs positive sizes and counts")
    x = np.log(np.asarray(sizes, dtype=np.float64))
    y = np.log(np.asarray(counts, dtype=np.float64))
    xc, yc = x - x.mean(), y - y.mean()
    sxx = float(xc @ xc)
    if sxx == 0.0:
        raise ConfigError("slope fit needs at least two distinct sizes")
    slope = float(xc @ yc) / sxx
    intercept = float(y.mean() - slope * x.mean())
    ss_res = float(np.sum((y - (intercept + slope * x)) ** 2))
    ss_tot = float(yc @ yc)
    return SlopeFit(
        slope=slope,
        intercept=intercept,
        r_squared=1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot,
    )


def _elapsed(start: float, timing: bool) -> float | None:
    return time.perf_counter() - start if timing else None


def _run_size(
    index: int,
    size: int,
    tree: TreeConfig,
    bench: BenchConfig,
    seed: int,
    timing: bool,
) -> list[BenchTrial]:
    cfg = tree.model_copy(update={"leaf_voxel_size": leaf_voxel_size(size, bench)})
    x = uniform_cloud(size, seed, STREAM_BENCH, index, 0, cloud_id=f"bench-{size}-x")
    y = uniform_cloud(size, seed, STREAM_BENCH, index, 1, cloud_id=f"bench-{size}-y")
    rng = make_rng(seed, STREAM_BENCH, index, 2)
    fx = rng.normal(size=(size, bench.d_model))
    fy = rng.normal(size=(size, bench.d_model))
    weights = MhaWeights.random(bench.d_model, bench.heads, seed)

    trials: list[BenchTrial] = []
    if size <= bench.dense_max_points:
        start = time.perf_counter()
        dense = multihead_attention(fx, fy, weights)
        trials.append(
            BenchTrial(
                size=size,
                mechanism=Mechanism.dense,
                key_evaluations=dense.map.nnz,
                recounted_key_evaluations=dense.map.n_queries * dense.map.n_keys,
                seconds=_elapsed(start, timing),
                buffer_bytes=dense.buffer_bytes,
            )
        )
    else:
        trials.append(
            BenchTrial(
                size=size,
                mechanism=Mechanism.dense,
                key_evaluations=size * size,
                recounted_key_evaluations=size * size,
                executed=False,
                buffer_bytes=bench.heads * size * size * np.dtype(np.float64).itemsize,
            )
        )

    start = time.perf_counter()
    tree_x, tree_y = build_tree(x, cfg), build_tree(y, cfg)
    ft_x = feature_pooling(tree_x, fx, None)
    ft_y = feature_pooling(tree_y, fy, None)
    out = pta_forward(tree_x, tree_y, ft_x, ft_y, weights, cfg.top_s)
    seconds = _elapsed(start, timing)
    stats_x = tree_stats(tree_x, cfg.leaf_cap)
    stats_y = tree_stats(tree_y, cfg.leaf_cap)
    trials.append(
        BenchTrial(
            size=size,
            mechanism=Mechanism.pta,
            key_evaluations=out.key_evaluations,
            recounted_key_evaluations=count_attended_keys(out),
            seconds=seconds,
            buffer_bytes=out.buffer_bytes,
            bound=work_bound(stats_x, stats_y, cfg.top_s),
            root_product=stats_x.root_count * stats_y.root_count,
            tree_query=stats_x,
            tree_key=stats_y,
        )
    )
    log.info(
        "sweep_trial",
        size=size,
        dense=trials[0].key_evaluations,
        pta=out.key_evaluations,
        leaf_voxel_size=cfg.leaf_voxel_size,
    )
    return trials


async def _run_parallel(
    sizes: Sequence[int], tree: TreeConfig, bench: BenchConfig, seed: int, timing: bool
) -> list[list[BenchTrial]]:
    results = await asyncio.gather(
        *[
            asyncio.to_thread(_run_size, i, n, tree, bench, seed, timing)
            for i, n in enumerate(sizes)
        ],
        return_exceptions=True,
    )
    trials: list[list[BenchTrial]] = []
    for size, result in zip(sizes, results):
        if isinstance(result, BaseException):
            reraise_if_fatal(result)
            log.warning("sweep_trial_failed", size=size, error=str(result))
            raise result
        trials.append(result)
    return trials


def run_sweep(
    tree: TreeConfig,
    bench: BenchConfig,
    seed: int,
    *,
    timing: bool = True,
    parallel: bool = False,
) -> BenchReport:
    """Measure both mechanisms at every size of ``bench.sizes``.

    Dense attention only executes up to ``bench.dense_max_points``; above
    that its count is the exact N*N it would evaluate and the trial is
    marked as not executed.

    Args:
        tree: Tree shape; the leaf voxel size is replaced per size.
        bench: Sweep settings.
        seed: Seed for clouds, features and weights.
        timing: Record wall-clock seconds (off for byte-identical reports).
        parallel: Run sizes concurrently in worker threads.
    """
    sizes = list(bench.sizes)
    if parallel:
        per_size = asyncio.run(_run_parallel(sizes, tree, bench, seed, timing))
    else:
        per_size = [_run_size(i, n, tree, bench, seed, timing) for i, n in enumerate(sizes)]
    trials = [t for group in per_size for t in group]
    fits = {
        mechanism.value: fit_slope(
            [t.size for t in trials if t.mechanism == mechanism],
            [t.key_evaluations for t in trials if t.mechanism == mechanism],
        )
        for mechanism in Mechanism
    }
    log.info("sweep_done", sizes=sizes, **{f"{k}_slope": v.slope for k, v in fits.items()})
    return BenchReport(
        seed=seed,
        sizes=sizes,
        leaf_voxel_sizes=[leaf_voxel_size(n, bench) for n in sizes],
        trials=trials,
        fits=fits,
    )


def report_to_csv(report: BenchReport) -> str:
    """One row per trial: size, mechanism, count, seconds, bytes."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["size", "mechanism", "key_evaluations", "seconds", "buffer_bytes", "executed"])
    for t in report.trials:
        writer.writerow(
            [
                t.size,
                t.mechanism.value,
                t.key_evaluations,
                "" if t.seconds is None else repr(t.seconds),
                t.buffer_bytes,
                int(t.executed),
            ]
        )
    return buffer.getvalue()
