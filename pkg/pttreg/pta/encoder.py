"""Tree transformer encoder over a pair of clouds."""

from __future__ import annotations

from dataclasses import dataclass

import structlog

from pttreg.attention.encoding import sinusoidal_pe
from pttreg.attention.mha import multihead_attention
from pttreg.attention.weights import BranchWeights, ModelWeights
from pttreg.config import ModelConfig, TreeConfig
from pttreg.geometry.tree import PointTree
from pttreg.numerics.linalg import Matrix
from pttreg.pta.pooling import FeatureTree, LayerEncoding, feature_pooling
from pttreg.pta.tree_attention import pta_cross, pta_self
from pttreg.utils.exceptions import ContractViolationError

log = structlog.get_logger()


@dataclass(frozen=True, slots=True)
class EncoderOutput:
    features_x: Matrix
    features_y: Matrix
    key_evaluations: int


class TreeEncoder:
    """Stack of encoder layers, each a self branch, a cross branch and a feedforward block.

    Every branch is a pre-norm residual: the normalised densest features are
    pooled up the tree, tree attention runs coarse to dense, and its densest
    output is added back. With ``attention_mode="dense"`` the branches attend
    densely over the densest layer and skip pooling.
    """

    def __init__(self, model: ModelConfig, tree: TreeConfig, weights: ModelWeights) -> None:
        if len(weights.encoder) != model.encoder_layers:
            raise ContractViolationError(
                f"{len(weights.encoder)} encoder weight sets for {model.encoder_layers} layers"
            )
        self.model = model
        self.tree = tree
        self.weights = weights
        self._layer_pe: LayerEncoding | None = (
            (lambda c: sinusoidal_pe(c, model.d_model, model.pe_base)) if model.multiscale_pe else None
        )

    def _pool(self, tree: PointTree, feats: Matrix, branch: BranchWeights) -> FeatureTree:
        normed = branch.norm(feats)
        pool = branch.pool if self.model.pooling_mode == "recalibrate" else None
        return feature_pooling(tree, normed, pool, layer_encoding=self._layer_pe)

    def _self_branch(self, tree: PointTree, feats: Matrix, branch: BranchWeights) -> tuple[Matrix, int]:
        if self.model.attention_mode == "dense":
            normed = branch.norm(feats)
            out = multihead_attention(normed, normed, branch.attn[0])
            return feats + out.features, out.map.nnz
        ft = self._pool(tree, feats, branch)
        res = pta_self(
            tree, ft, branch.attn, self.tree.top_s, coarse_guidance=self.model.coarse_guidance
        )
        return feats + res.features_q, res.total_evaluations

    def _cross_branch(
        self, tree_x: PointTree, tree_y: PointTree, fx: Matrix, fy: Matrix, branch: BranchWeights
    ) -> tuple[Matrix, Matrix, int]:
        if self.model.attention_mode == "dense":
            nx, ny = branch.norm(fx), branch.norm(fy)
            out_x = multihead_attention(nx, ny, branch.attn[0])
            out_y = multihead_attention(ny, nx, branch.attn[0])
            return fx + out_x.features, fy + out_y.features, out_x.map.nnz + out_y.map.nnz
        ft_x = self._pool(tree_x, fx, branch)
        ft_y = self._pool(tree_y, fy, branch)
        res = pta_cross(
            tree_x, tree_y, ft_x, ft_y, branch.attn, self.tree.top_s,
            coarse_guidance=self.model.coarse_guidance,
        )
        return fx + res.features_q, fy + res.features_k, res.total_evaluations

    def encode(self, tree_x: PointTree, tree_y: PointTree, feats_x: Matrix, feats_y: Matrix) -> EncoderOutput:
        """Condition both clouds' densest features on each other.

        Args:
            tree_x: Source tree.
            tree_y: Target tree.
            feats_x: (M, D) initial source features, without positional encoding.
            feats_y: (N, D) initial target features.

        Returns:
            EncoderOutput with (M, D) and (N, D) features.
        """
        d = self.model.d_model
        for name, tree, feats in (("source", tree_x, feats_x), ("target", tree_y, feats_y)):
            if feats.ndim != 2 or feats.shape != (tree.counts[-1], d):
                raise ContractViolationError(
                    f"{name} features {feats.shape} do not match ({tree.counts[-1]}, {d})"
                )
        fx = feats_x + sinusoidal_pe(tree_x.densest, d, self.model.pe_base)
        fy = feats_y + sinusoidal_pe(tree_y.densest, d, self.model.pe_base)
        evaluations = 0
        for index, layer in enumerate(self.weights.encoder):
            fx, n_x = self._self_branch(tree_x, fx, layer.self_branch)
            fy, n_y = self._self_branch(tree_y, fy, layer.self_branch)
            fx, fy, n_c = self._cross_branch(tree_x, tree_y, fx, fy, layer.cross_branch)
            fx = fx + layer.ffn(layer.ffn_norm(fx))
            fy = fy + layer.ffn(layer.ffn_norm(fy))
            evaluations += n_x + n_y + n_c
            log.debug("encoder_layer_done", layer=index, key_evaluations=n_x + n_y + n_c)
        return EncoderOutput(fx, fy, evaluations)


def encode(
    tree_x: PointTree,
    tree_y: PointTree,
    feats_x: Matrix,
    feats_y: Matrix,
    model: ModelConfig,
    tree: TreeConfig,
    weights: ModelWeights,
) -> EncoderOutput:
    return TreeEncoder(model, tree, weights).encode(tree_x, tree_y, feats_x, feats_y)
