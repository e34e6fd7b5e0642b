"""Point clouds, voxel trees, rigid transforms and file formats."""

from pttreg.geometry.cloud import PointCloud
from pttreg.geometry.transform import RigidTransform
from pttreg.geometry.tree import PointTree, build_tree, tree_stats, voxelize

__all__ = ["PointCloud", "PointTree", "RigidTransform", "build_tree", "tree_stats", "voxelize"]
