"""Dense/ragged multi-head attention, positional encoding and model weights."""

from pttreg.attention.encoding import sinusoidal_pe
from pttreg.attention.io import load_bundle, save_bundle
from pttreg.attention.mha import (
    AttentionMap,
    AttentionOutput,
    multihead_attention,
    ragged_multihead_attention,
)
from pttreg.attention.weights import (
    MhaWeights,
    ModelWeights,
    ParameterBundle,
    init_bundle,
    model_specs,
)

__all__ = [
    "AttentionMap",
    "AttentionOutput",
    "MhaWeights",
    "ModelWeights",
    "ParameterBundle",
    "init_bundle",
    "load_bundle",
    "model_specs",
    "multihead_attention",
    "ragged_multihead_attention",
    "save_bundle",
    "sinusoidal_pe",
]
