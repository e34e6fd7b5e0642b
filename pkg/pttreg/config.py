"""pttreg configuration via Pydantic Settings."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from pttreg.utils.exceptions import ConfigError


class TreeConfig(BaseModel):
    """Shape of the voxel hierarchy built over each cloud."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    layers: int = Field(default=3, ge=1, description="Tree layers L_tau")
    leaf_voxel_size: float = Field(default=0.2, gt=0.0, description="Leaf voxel edge V")
    group_factor: int = Field(default=4, ge=2, description="Voxels merged per coarser voxel")
    top_s: int = Field(default=8, ge=1, description="Coarse keys selected per coarse query")
    leaf_cap: int = Field(default=64, ge=1, description="Leaf occupancy reported as over capacity")

    @model_validator(mode="after")
    def _finite_voxel(self) -> TreeConfig:
        if not math.isfinite(self.leaf_voxel_size):
            raise ValueError("leaf_voxel_size must be finite")
        return self

    @property
    def grouping_edge(self) -> int:
        """Per-axis voxel merge factor g, the smallest integer with g**3 >= group_factor."""
        g = 1
        while g**3 < self.group_factor:
            g += 1
        return g


class ModelConfig(BaseModel):
    """Encoder/decoder dimensions and structural switches."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    d_model: int = Field(default=264, ge=6, description="Feature width D, a multiple of heads and of 6")
    heads: int = Field(default=8, ge=1, description="Attention heads H")
    encoder_layers: int = Field(default=6, ge=0, description="Encoder layers L_e")
    pe_base: float = Field(default=10000.0, gt=1.0, description="Positional encoding base frequency")
    shared_params: bool = Field(default=True, description="Share MHA weights across tree layers")
    pooling_mode: Literal["recalibrate", "equal"] = "recalibrate"
    coarse_guidance: bool = Field(default=True, description="Add coarse features to dense layers")
    multiscale_pe: bool = Field(default=False, description="Add positional encoding per tree layer")
    attention_mode: Literal["pta", "dense"] = "pta"

    @model_validator(mode="after")
    def _check_divisibility(self) -> ModelConfig:
        if self.d_model % self.heads != 0:
            raise ValueError(f"d_model={self.d_model} is not divisible by heads={self.heads}")
        if self.d_model % 6 != 0:
            raise ValueError(f"d_model={self.d_model} is not divisible by 6")
        return self

    @property
    def head_dim(self) -> int:
        return self.d_model // self.heads


class LossConfig(BaseModel):
    """Loss weights and radii."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    lambda_c: float = Field(default=1.0, gt=0.0)
    lambda_f: float = Field(default=0.1, gt=0.0)
    overlap_radius: float = Field(default=0.2, gt=0.0, description="r_o")
    positive_radius: float = Field(default=0.2, gt=0.0, description="r_p")
    negative_radius: float = Field(default=0.4, gt=0.0, description="r_n")

    @model_validator(mode="after")
    def _check_margins(self) -> LossConfig:
        if self.negative_radius <= self.positive_radius:
            raise ValueError("negative_radius must exceed positive_radius")
        return self


class MetricThresholds(BaseModel):
    """Success criteria for a single registration."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    max_rre_deg: float = Field(default=5.0, gt=0.0)
    max_rte: float = Field(default=2.0, gt=0.0)
    max_rmse: float = Field(default=0.2, gt=0.0)


class BenchConfig(BaseModel):
    """Complexity sweep settings."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    sizes: list[int] = Field(default=[1000, 2000, 4000, 8000, 16000, 32000])
    points_per_leaf: float = Field(default=8.0, gt=0.0)
    dense_max_points: int = Field(default=4096, ge=1, description="Largest N run densely")
    d_model: int = Field(default=48, ge=6)
    heads: int = Field(default=8, ge=1)

    @model_validator(mode="after")
    def _check_sizes(self) -> BenchConfig:
        if len(set(self.sizes)) < 4:
            raise ValueError("a sweep needs at least 4 distinct sizes")
        if sorted(self.sizes) != self.sizes:
            raise ValueError("sizes must be ascending")
        if any(n < 1 for n in self.sizes):
            raise ValueError("sizes must be positive")
        return self


class RunConfig(BaseSettings):
    """Top-level configuration, overridable from PTTREG_* environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="PTTREG_",
        env_nested_delimiter="__",
        extra="forbid",
        frozen=True,
    )

    model: ModelConfig = Field(default_factory=ModelConfig)
    tree: TreeConfig = Field(default_factory=TreeConfig)
    loss: LossConfig = Field(default_factory=LossConfig)
    thresholds: MetricThresholds = Field(default_factory=MetricThresholds)
    bench: BenchConfig = Field(default_factory=BenchConfig)
    seed: int = Field(default=0, ge=0, lt=2**64)
    weights_path: str | None = None
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"] = Field(
        default="INFO", description="structlog level; the CLI -v flag forces DEBUG"
    )

    @classmethod
    def from_file(cls, path: str | Path) -> RunConfig:
        """Load a JSON config file; missing keys take their defaults."""
        return load_run_config(path)

    def to_json(self) -> str:
        """Serialise every field, defaults included, as stable JSON."""
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True)


def load_run_config(path: str | Path | None = None, **overrides: object) -> RunConfig:
    """Build a RunConfig from an optional JSON file plus keyword overrides.

    Args:
        path: JSON config file; missing keys take their defaults.
        **overrides: Top-level fields that win over the file (e.g. seed).

    Returns:
        Validated RunConfig.

    Raises:
        ConfigError: On unreadable files or invariant violations.
    """
    data: dict[str, object] = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must contain a JSON object")
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
