"""Point tree attention: pooling, region selection, tree attention passes and the encoder."""

from pttreg.pta.encoder import EncoderOutput, TreeEncoder, encode
from pttreg.pta.pooling import FeatureTree, feature_pooling, incorporate_coarse
from pttreg.pta.regions import AttendedRegions, check_region_soundness, specify_regions
from pttreg.pta.tree_attention import (
    PtaOutput,
    count_attended_keys,
    pta_cross,
    pta_forward,
    pta_layer_attention,
    pta_self,
)

__all__ = [
    "AttendedRegions",
    "EncoderOutput",
    "FeatureTree",
    "PtaOutput",
    "TreeEncoder",
    "check_region_soundness",
    "count_attended_keys",
    "encode",
    "feature_pooling",
    "incorporate_coarse",
    "pta_cross",
    "pta_forward",
    "pta_layer_attention",
    "pta_self",
    "specify_regions",
]
