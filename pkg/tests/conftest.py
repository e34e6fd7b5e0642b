"""Shared pytest fixtures."""

from __future__ import annotations

import numpy as np
import pytest
import structlog

from pttreg.attention.weights import MhaWeights
from pttreg.config import ModelConfig, RunConfig, TreeConfig
from pttreg.geometry.cloud import PointCloud
from pttreg.geometry.transform import RigidTransform, synthetic_pair, uniform_cloud


@pytest.fixture
def rng() -> np.random.Generator:
    """Return a fixed-seed generator."""
    return np.random.default_rng(1234)


@pytest.fixture
def small_model() -> ModelConfig:
    """Return a narrow one-layer model that runs in milliseconds."""
    return ModelConfig(d_model=12, heads=2, encoder_layers=1)


@pytest.fixture
def small_tree() -> TreeConfig:
    """Return a three-layer tree config sized for a few hundred unit-cube points."""
    return TreeConfig(layers=3, leaf_voxel_size=0.2, top_s=4)


@pytest.fixture
def small_config(small_model: ModelConfig, small_tree: TreeConfig) -> RunConfig:
    """Return a RunConfig built from the small model and tree."""
    return RunConfig(model=small_model, tree=small_tree, seed=7)


@pytest.fixture
def mha_weights() -> MhaWeights:
    """Return seeded D=12, H=2 attention weights."""
    return MhaWeights.random(12, 2, seed=3)


@pytest.fixture
def cloud_pair() -> tuple[PointCloud, PointCloud, RigidTransform]:
    """Return a noiseless synthetic (source, target, gt) triple of 200 points."""
    return synthetic_pair(uniform_cloud(200, 11, cloud_id="base"), seed=11)


@pytest.fixture(autouse=True)
def _reset_structlog():
    yield
    structlog.reset_defaults()
