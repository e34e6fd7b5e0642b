"""Coarse-to-dense point tree attention."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import structlog

from pttreg.attention.mha import AttentionMap, AttentionOutput, multihead_attention, ragged_multihead_attention
from pttreg.attention.weights import MhaWeights
from pttreg.geometry.tree import PointTree
from pttreg.numerics.linalg import Matrix
from pttreg.pta.pooling import FeatureTree, incorporate_coarse
from pttreg.pta.regions import AttendedRegions, specify_regions
from pttreg.utils.exceptions import ContractViolationError

log = structlog.get_logger()


@dataclass(frozen=True, slots=True)
class PtaOutput:
    """Result of one tree attention pass.

    ``features_q`` are the densest-layer outputs for the query cloud and
    ``features_k`` those of the key cloud attending back. Maps and regions
    are per layer, coarsest first; regions at layer 0 are None since the
    coarsest layer attends globally. ``key_evaluations`` counts the
    query-to-key direction only; ``total_evaluations`` both directions run.
    """

    features_q: Matrix
    features_k: Matrix
    maps_q: tuple[AttentionMap, ...]
    maps_k: tuple[AttentionMap, ...]
    regions_q: tuple[AttendedRegions | None, ...]
    regions_k: tuple[AttendedRegions | None, ...]
    key_evaluations: int
    total_evaluations: int
    buffer_bytes: int


def pta_layer_attention(
    psi_q: Matrix, psi_k: Matrix, regions: AttendedRegions, w: MhaWeights
) -> AttentionOutput:
    """Multi-head attention of each dense query over its attended region only."""
    if regions.n_queries != psi_q.shape[0]:
        raise ContractViolationError(f"{regions.n_queries} regions for {psi_q.shape[0]} queries")
    return ragged_multihead_attention(psi_q, psi_k, regions.offsets, regions.columns, w)


def layer_weights(w: MhaWeights | Sequence[MhaWeights], layers: int) -> list[MhaWeights]:
    """One MhaWeights per tree layer; a single set (or a 1-tuple) is shared."""
    if isinstance(w, MhaWeights):
        return [w] * layers
    if len(w) == 1:
        return [w[0]] * layers
    if len(w) != layers:
        raise ContractViolationError(f"{len(w)} attention weight sets for {layers} tree layers")
    return list(w)


def pta_forward(
    tree_q: PointTree,
    tree_k: PointTree,
    ft_q: FeatureTree,
    ft_k: FeatureTree,
    w: MhaWeights | Sequence[MhaWeights],
    top_s: int,
    *,
    coarse_guidance: bool = True,
    symmetric: bool = False,
) -> PtaOutput:
    """Run tree attention from the roots down to the densest layers.

    The coarsest layers attend densely. At every finer layer each side adds
    its parents' attention outputs to its features (when ``coarse_guidance``),
    the previous layer's map selects the attended regions and attention runs
    only inside them. Both directions are evaluated since the key side's
    features at layer l depend on its own outputs at layer l-1; with
    ``symmetric`` (same cloud on both sides) the query side is reused.
    """
    if tree_q.layers != tree_k.layers:
        raise ContractViolationError(f"tree depths differ: {tree_q.layers} vs {tree_k.layers}")
    ft_q.check_aligned(tree_q)
    ft_k.check_aligned(tree_k)
    weights = layer_weights(w, tree_q.layers)

    out_q = multihead_attention(ft_q[0], ft_k[0], weights[0])
    out_k = out_q if symmetric else multihead_attention(ft_k[0], ft_q[0], weights[0])
    maps_q, maps_k = [out_q.map], [out_k.map]
    regions_q: list[AttendedRegions | None] = [None]
    regions_k: list[AttendedRegions | None] = [None]
    forward = out_q.map.nnz
    backward = 0 if symmetric else out_k.map.nnz
    buffer_bytes = out_q.buffer_bytes + (0 if symmetric else out_k.buffer_bytes)

    for layer in range(1, tree_q.layers):
        psi_q, psi_k = ft_q[layer], ft_k[layer]
        if coarse_guidance:
            psi_q = incorporate_coarse(psi_q, out_q.features, tree_q.parent_index[layer])
            psi_k = incorporate_coarse(psi_k, out_k.features, tree_k.parent_index[layer])
        reg_q = specify_regions(
            out_q.map, tree_q.child_index[layer - 1], tree_k.child_index[layer - 1], top_s
        )
        next_q = pta_layer_attention(psi_q, psi_k, reg_q, weights[layer])
        if symmetric:
            reg_k, next_k = reg_q, next_q
        else:
            reg_k = specify_regions(
                out_k.map, tree_k.child_index[layer - 1], tree_q.child_index[layer - 1], top_s
            )
            next_k = pta_layer_attention(psi_k, psi_q, reg_k, weights[layer])
            backward += reg_k.nnz
            buffer_bytes += next_k.buffer_bytes
        forward += reg_q.nnz
        buffer_bytes += next_q.buffer_bytes
        out_q, out_k = next_q, next_k
        maps_q.append(out_q.map)
        maps_k.append(out_k.map)
        regions_q.append(reg_q)
        regions_k.append(reg_k)

    log.debug(
        "pta_pass",
        layers=tree_q.layers,
        queries=tree_q.counts[-1],
        keys=tree_k.counts[-1],
        key_evaluations=forward,
    )
    return PtaOutput(
        features_q=out_q.features,
        features_k=out_k.features,
        maps_q=tuple(maps_q),
        maps_k=tuple(maps_k),
        regions_q=tuple(regions_q),
        regions_k=tuple(regions_k),
        key_evaluations=forward,
        total_evaluations=forward + backward,
        buffer_bytes=buffer_bytes,
    )


def pta_self(
    tree: PointTree,
    ft: FeatureTree,
    w: MhaWeights | Sequence[MhaWeights],
    top_s: int,
    *,
    coarse_guidance: bool = True,
) -> PtaOutput:
    """Tree self-attention of a cloud over itself."""
    return pta_forward(tree, tree, ft, ft, w, top_s, coarse_guidance=coarse_guidance, symmetric=True)


def pta_cross(
    tree_x: PointTree,
    tree_y: PointTree,
    ft_x: FeatureTree,
    ft_y: FeatureTree,
    w: MhaWeights | Sequence[MhaWeights],
    top_s: int,
    *,
    coarse_guidance: bool = True,
) -> PtaOutput:
    """Tree cross-attention; features_q updates X from Y and features_k updates Y from X."""
    return pta_forward(tree_x, tree_y, ft_x, ft_y, w, top_s, coarse_guidance=coarse_guidance)


def count_attended_keys(output: PtaOutput) -> int:
    """Recount query-side key evaluations from the stored maps and regions."""
    total = int(output.maps_q[0].n_queries) * int(output.maps_q[0].n_keys)
    for regions in output.regions_q[1:]:
        if regions is None:
            raise ContractViolationError("missing regions below the coarsest layer")
        total += int(sum(regions.keys_for(i).shape[0] for i in range(regions.n_queries)))
    return total

