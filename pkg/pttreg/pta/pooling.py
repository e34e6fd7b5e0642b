"""Feature pooling up a point tree and coarse-feature incorporation."""

from __future__ import annotations

from collections.abc import Callable, Iterator
from dataclasses import dataclass

import numpy as np

from pttreg.attention.weights import MlpWeights
from pttreg.geometry.tree import PointTree
from pttreg.numerics.linalg import IndexArray, Matrix, segment_offsets
from pttreg.utils.exceptions import ContractViolationError

LayerEncoding = Callable[[Matrix], Matrix]


@dataclass(frozen=True, slots=True)
class FeatureTree:
    """Per-layer features aligned row-for-row with a PointTree, coarsest first."""

    layers: tuple[Matrix, ...]

    def __getitem__(self, layer: int) -> Matrix:
        return self.layers[layer]

    def __len__(self) -> int:
        return len(self.layers)

    def __iter__(self) -> Iterator[Matrix]:
        return iter(self.layers)

    @property
    def densest(self) -> Matrix:
        return self.layers[-1]

    def check_aligned(self, tree: PointTree) -> None:
        if len(self.layers) != tree.layers:
            raise ContractViolationError(f"{len(self.layers)} feature layers for a {tree.layers}-layer tree")
        for layer, (feats, count) in enumerate(zip(self.layers, tree.counts)):
            if feats.ndim != 2 or feats.shape[0] != count:
                raise ContractViolationError(
                    f"layer {layer} features have shape {feats.shape}, tree has {count} nodes"
                )
            if not np.all(np.isfinite(feats)):
                raise ContractViolationError(f"layer {layer} features are not finite")


def feature_pooling(
    tree: PointTree,
    dense_features: Matrix,
    pool: MlpWeights | None,
    *,
    layer_encoding: LayerEncoding | None = None,
) -> FeatureTree:
    """Pool densest-layer features up to the root.

    Each coarse node takes the mean over its children j of
    ``pool(concat(F_d[j], C_d[j] - C_c[i]))``. With ``pool=None`` the plain
    child mean is used instead. ``layer_encoding``, when given, is evaluated
    on each coarse layer's coordinates and added to its pooled features.

    Args:
        tree: Point tree.
        dense_features: (N_densest, D) features, positional encoding included.
        pool: Two-layer MLP with input width D+3 and output width D.
        layer_encoding: Optional per-layer positional encoding.
    """
    if dense_features.ndim != 2 or dense_features.shape[0] != tree.counts[-1]:
        raise ContractViolationError(
            f"features {dense_features.shape} do not match the {tree.counts[-1]} densest nodes"
        )
    feats: list[Matrix] = [np.empty((0, 0))] * tree.layers
    feats[-1] = dense_features
    for layer in range(tree.layers - 1, 0, -1):
        parent = tree.parent_index[layer]
        children = tree.child_index[layer - 1]
        if pool is None:
            per_child = feats[layer]
        else:
            offset = tree.coords[layer] - tree.coords[layer - 1][parent]
            per_child = pool(np.hstack([feats[layer], offset]))
        lengths = np.array([len(c) for c in children], dtype=np.int64)
        order = np.concatenate(children)
        sums = np.add.reduceat(per_child[order], segment_offsets(lengths)[:-1], axis=0)
        pooled = sums / lengths[:, None]
        if layer_encoding is not None:
            pooled = pooled + layer_encoding(tree.coords[layer - 1])
        feats[layer - 1] = pooled
    return FeatureTree(tuple(feats))


def incorporate_coarse(dense_f: Matrix, coarse_phi: Matrix, parent_index: IndexArray) -> Matrix:
    """Add each dense node's parent attention output: Ψ[i] = F[i] + Φ[parent(i)]."""
    if parent_index.shape[0] != dense_f.shape[0]:
        raise ContractViolationError(
            f"{parent_index.shape[0]} parent entries for {dense_f.shape[0]} dense rows"
        )
    if parent_index.shape[0] and (parent_index.min() < 0 or parent_index.max() >= coarse_phi.shape[0]):
        raise ContractViolationError("parent index out of range")
    if coarse_phi.shape[1] != dense_f.shape[1]:
        raise ContractViolationError(f"width mismatch {coarse_phi.shape[1]} != {dense_f.shape[1]}")
    return dense_f + coarse_phi[parent_index]
