"""Shared Pydantic v2 report models.

Every JSON document the CLI writes is one of the top-level models here and
is described by ``schemas/report.schema.json``.
"""

from __future__ import annotations

from enum import StrEnum

from pydantic import BaseModel, Field


class Mechanism(StrEnum):
    """Attention mechanism measured in a benchmark trial."""

    dense = "dense"
    pta = "pta"


class TreeStats(BaseModel):
    """Realised shape of one point tree."""

    layer_counts: list[int]
    max_children: list[int] = Field(default_factory=list)
    mean_children: list[float] = Field(default_factory=list)
    max_inner_children: int = 0
    max_leaf_occupancy: int = 1
    leaf_cap: int | None = None
    leaves_over_cap: int = 0
    root_count: int


class LayerDump(BaseModel):
    """One tree layer: node coordinates and index maps."""

    layer: int
    count: int
    coords: list[list[float]]
    parent: list[int] | None = None
    children: list[list[int]] | None = None


class TreeReport(BaseModel):
    """Output of the ``tree`` command."""

    cloud: str
    layers: list[LayerDump]
    stats: TreeStats


class TransformReport(BaseModel):
    """Rigid transform with R in row-major order."""

    rotation: list[float]
    translation: list[float]


class ScoreSummary(BaseModel):
    """Summary statistics of predicted overlap scores."""

    count: int
    min: float
    mean: float
    max: float


class RegistrationMetrics(BaseModel):
    """Errors of an estimated transform against ground truth."""

    rre_deg: float
    rte: float
    rmse: float
    chamfer: float
    chamfer_convention: str = "average of the two directional mean squared nearest-neighbour distances"
    success: bool
    success_rmse: bool


class LossBreakdown(BaseModel):
    """Forward-evaluated training losses."""

    overlap: float
    correspondence: float
    feature: float
    total: float
    no_overlap: bool = False
    no_anchors: bool = False


class RegistrationReport(BaseModel):
    """Output of the ``register`` command."""

    source: str
    target: str
    seed: int
    oracle: bool
    transform: TransformReport
    overlap_scores_source: ScoreSummary
    overlap_scores_target: ScoreSummary
    tree_source: TreeStats
    tree_target: TreeStats
    key_evaluations: int
    metrics: RegistrationMetrics | None = None
    losses: LossBreakdown | None = None


class RecallSummary(BaseModel):
    """Fraction of successful registrations over a batch."""

    pairs: int
    recall: float
    recall_rmse: float
    median_rre_deg: float
    median_rte: float


class BenchTrial(BaseModel):
    """One (N, mechanism) measurement."""

    size: int
    mechanism: Mechanism
    key_evaluations: int
    recounted_key_evaluations: int
    executed: bool = True
    seconds: float | None = None
    buffer_bytes: int
    bound: int | None = None
    root_product: int | None = None
    tree_query: TreeStats | None = None
    tree_key: TreeStats | None = None


class SlopeFit(BaseModel):
    """Least-squares line through (ln N, ln count)."""

    slope: float
    intercept: float
    r_squared: float


class BenchReport(BaseModel):
    """Output of the ``bench`` command."""

    seed: int
    sizes: list[int]
    leaf_voxel_sizes: list[float]
    trials: list[BenchTrial]
    fits: dict[str, SlopeFit]


class SelfTestCheck(BaseModel):
    """Outcome of one self-test suite."""

    name: str
    passed: bool
    detail: str = ""


class SelfTestReport(BaseModel):
    """Output of the ``selftest`` command."""

    all_passed: bool
    checks: list[SelfTestCheck]
