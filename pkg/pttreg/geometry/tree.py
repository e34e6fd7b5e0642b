"""Voxel hierarchy over a point cloud.

Layers are indexed coarsest first: ``coords[0]`` is the root layer and
``coords[-1]`` holds the input points. Each coarser layer groups the nodes of
the layer below by integer voxel key; the leaf grouping uses edge V and every
further layer multiplies the edge by g (``TreeConfig.grouping_edge``).
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import structlog

from pttreg.config import TreeConfig
from pttreg.core.state import TreeStats
from pttreg.geometry.cloud import PointCloud
from pttreg.numerics.linalg import IndexArray, Matrix
from pttreg.utils.exceptions import ConfigError, ContractViolationError

log = structlog.get_logger()

VoxelKey = tuple[int, int, int]


def _group_keys(keys: np.ndarray) -> tuple[np.ndarray, IndexArray, list[IndexArray]]:
    """Group rows of an integer key array.

    Returns:
        (unique keys sorted lexicographically, group index per row, member rows per group).
    """
    unique, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1).astype(np.int64)
    order = np.argsort(inverse, kind="stable").astype(np.int64)
    counts = np.bincount(inverse, minlength=unique.shape[0])
    members = np.split(order, np.cumsum(counts)[:-1])
    return unique, inverse, members


def voxel_keys(points: Matrix, voxel_size: float) -> np.ndarray:
    if not voxel_size > 0.0:
        raise ConfigError(f"voxel size must be positive, got {voxel_size}")
    return np.floor(points / voxel_size).astype(np.int64)


def voxelize(cloud: PointCloud, voxel_size: float) -> dict[VoxelKey, IndexArray]:
    """Assign every point to the voxel floor(coordinate / voxel_size).

    Args:
        cloud: Input cloud.
        voxel_size: Voxel edge length.

    Returns:
        Mapping from voxel key to ascending member indices, keys in
        lexicographic order.
    """
    unique, _, members = _group_keys(voxel_keys(cloud.points, voxel_size))
    return {(int(k[0]), int(k[1]), int(k[2])): grp for k, grp in zip(unique, members)}


@dataclass(frozen=True, slots=True)
class PointTree:
    """Coarse-to-dense hierarchy with parent/child index maps.

    Attributes:
        coords: Node coordinates per layer, coarsest first.
        parent_index: ``parent_index[l][j]`` is the parent in layer l-1 of
            node j of layer l; ``parent_index[0]`` is empty.
        child_index: ``child_index[l][i]`` lists, ascending, the children in
            layer l+1 of node i of layer l; the densest layer has none.
    """

    coords: tuple[Matrix, ...]
    parent_index: tuple[IndexArray, ...]
    child_index: tuple[tuple[IndexArray, ...], ...]

    @classmethod
    def from_parents(cls, densest: Matrix, parents: Sequence[IndexArray]) -> PointTree:
        """Assemble a tree from its densest coordinates and parent maps.

        Coarse coordinates are the means of their children's coordinates.

        Args:
            densest: (n, 3) coordinates of the densest layer.
            parents: Parent maps ordered coarse to dense; ``parents[j]`` maps
                layer j+1 onto layer j.
        """
        densest = np.array(densest, dtype=np.float64)
        if densest.ndim != 2 or densest.shape[1] != 3 or densest.shape[0] == 0:
            raise ContractViolationError(f"densest layer must be (n>0, 3), got {densest.shape}")
        n_layers = len(parents) + 1
        coords: list[Matrix] = [np.empty((0, 3))] * n_layers
        parent_index: list[IndexArray] = [np.empty(0, dtype=np.int64)] * n_layers
        child_index: list[tuple[IndexArray, ...]] = [()] * n_layers
        coords[-1] = densest
        for layer in range(n_layers - 1, 0, -1):
            parent = np.asarray(parents[layer - 1], dtype=np.int64).reshape(-1)
            dense = coords[layer]
            if parent.shape[0] != dense.shape[0]:
                raise ContractViolationError(
                    f"layer {layer} has {dense.shape[0]} nodes but {parent.shape[0]} parent entries"
                )
            if parent.shape[0] and parent.min() < 0:
                raise ContractViolationError(f"negative parent index in layer {layer}")
            n_coarse = int(parent.max()) + 1
            counts = np.bincount(parent, minlength=n_coarse)
            if np.any(counts == 0):
                raise ContractViolationError(f"childless node in layer {layer - 1}")
            sums = np.stack(
                [np.bincount(parent, weights=dense[:, a], minlength=n_coarse) for a in range(3)],
                axis=1,
            )
            coords[layer - 1] = sums / counts[:, None]
            order = np.argsort(parent, kind="stable").astype(np.int64)
            child_index[layer - 1] = tuple(np.split(order, np.cumsum(counts)[:-1]))
            parent_index[layer] = parent
        for arr in (*coords, *parent_index):
            arr.flags.writeable = False
        return cls(tuple(coords), tuple(parent_index), tuple(child_index))

    @property
    def layers(self) -> int:
        return len(self.coords)

    @property
    def counts(self) -> list[int]:
        return [int(c.shape[0]) for c in self.coords]

    @property
    def densest(self) -> Matrix:
        return self.coords[-1]

    def validate(self) -> None:
        """Check the partition, consistency and averaging invariants.

        Raises:
            ContractViolationError: On the first violated invariant.
        """
        for layer in range(self.layers - 1):
            n_dense = self.coords[layer + 1].shape[0]
            children = self.child_index[layer]
            if len(children) != self.coords[layer].shape[0]:
                raise ContractViolationError(f"layer {layer} child lists do not match node count")
            flat = np.concatenate(children) if children else np.empty(0, dtype=np.int64)
            if flat.shape[0] != n_dense or not np.array_equal(np.sort(flat), np.arange(n_dense)):
                raise ContractViolationError(f"children of layer {layer} do not partition layer {layer + 1}")
            parent = self.parent_index[layer + 1]
            sizes = np.array([k.shape[0] for k in children], dtype=np.int64)
            if np.any(sizes == 0):
                i = int(np.flatnonzero(sizes == 0)[0])
                raise ContractViolationError(f"node {i} in layer {layer} has no children")
            owner = np.repeat(np.arange(sizes.shape[0]), sizes)
            mismatch = np.flatnonzero(parent[flat] != owner)
            if mismatch.size:
                i = int(owner[mismatch[0]])
                raise ContractViolationError(f"parent/child maps disagree at layer {layer}, node {i}")
            sums = np.zeros_like(self.coords[layer])
            np.add.at(sums, owner, self.coords[layer + 1][flat])
            off = np.flatnonzero(np.any(np.abs(sums / sizes[:, None] - self.coords[layer]) > 1e-12, axis=1))
            if off.size:
                i = int(off[0])
                raise ContractViolationError(f"coordinate of node {i} in layer {layer} is not its children's mean")


def build_tree(cloud: PointCloud, cfg: TreeConfig) -> PointTree:
    """Build the L-layer voxel hierarchy of a cloud.

    Args:
        cloud: Input points, used verbatim as the densest layer.
        cfg: Tree configuration.

    Returns:
        PointTree whose node counts never increase toward the root.
    """
    parents: list[IndexArray] = []
    if cfg.layers > 1:
        keys = voxel_keys(cloud.points, cfg.leaf_voxel_size)
        g = cfg.grouping_edge
        for level in range(cfg.layers - 1):
            if level > 0:
                keys = np.floor_divide(keys, g)
            keys, parent, _ = _group_keys(keys)
            parents.insert(0, parent)
    tree = PointTree.from_parents(cloud.points, parents)
    log.debug("tree_built", cloud=cloud.id, counts=tree.counts)
    return tree


def tree_stats(tree: PointTree, leaf_cap: int | None = None) -> TreeStats:
    """Summarise layer sizes and fan-out.

    ``max_children[l]`` is the largest child list of layer l (for every layer
    but the densest). The leaf voxels are the layer directly above the
    densest one; their largest membership is the max leaf occupancy.
    """
    counts = tree.counts
    max_children: list[int] = []
    mean_children: list[float] = []
    for layer in range(tree.layers - 1):
        sizes = np.array([len(c) for c in tree.child_index[layer]])
        max_children.append(int(sizes.max()))
        mean_children.append(float(sizes.mean()))
    max_leaf = max_children[-1] if max_children else 1
    exceeded = 0
    if leaf_cap is not None and tree.layers > 1:
        exceeded = sum(1 for c in tree.child_index[-2] if len(c) > leaf_cap)
    return TreeStats(
        layer_counts=counts,
        max_children=max_children,
        mean_children=mean_children,
        max_inner_children=max(max_children[:-1], default=0),
        max_leaf_occupancy=max_leaf,
        leaf_cap=leaf_cap,
        leaves_over_cap=exceeded,
        root_count=counts[0],
    )
