"""Attended regions: which dense keys each dense query may see."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from pttreg.attention.mha import AttentionMap
from pttreg.numerics.linalg import IndexArray, segment_offsets, topk_indices
from pttreg.utils.exceptions import ContractViolationError


@dataclass(frozen=True, slots=True)
class AttendedRegions:
    """Row-compressed key lists per dense query, with their provenance.

    Attributes:
        offsets: CSR offsets over dense queries.
        columns: Dense key indices; ascending and unique within each row.
        selected: Per coarse query, the ascending coarse keys chosen by top-S.
        query_parent: Coarse parent of each dense query.
    """

    offsets: IndexArray
    columns: IndexArray
    selected: tuple[IndexArray, ...]
    query_parent: IndexArray

    @property
    def n_queries(self) -> int:
        return int(self.offsets.shape[0]) - 1

    @property
    def nnz(self) -> int:
        return int(self.columns.shape[0])

    def keys_for(self, query: int) -> IndexArray:
        return self.columns[self.offsets[query] : self.offsets[query + 1]]

    def sizes(self) -> IndexArray:
        return np.diff(self.offsets)

    def with_extra_key(self, query: int, key: int) -> AttendedRegions:
        """Copy with one key added to one query's region (fault injection)."""
        lo, hi = self.offsets[query], self.offsets[query + 1]
        row = np.union1d(self.columns[lo:hi], [key]).astype(np.int64)
        columns = np.concatenate([self.columns[:lo], row, self.columns[hi:]])
        lengths = self.sizes()
        lengths[query] = row.shape[0]
        return AttendedRegions(segment_offsets(lengths), columns, self.selected, self.query_parent)


def _parents_of(children: Sequence[IndexArray]) -> IndexArray:
    n = sum(len(c) for c in children)
    parent = np.empty(n, dtype=np.int64)
    for i, kids in enumerate(children):
        parent[kids] = i
    return parent


def specify_regions(
    map_c: AttentionMap,
    child_q: Sequence[IndexArray],
    child_k: Sequence[IndexArray],
    top_s: int,
) -> AttendedRegions:
    """Expand a coarse attention map into dense attended regions.

    Coarse query i keeps its ``min(S, row length)`` highest-scoring keys (ties
    to the lowest key index); each dense child of i attends to the union of
    the children of those keys.

    Args:
        map_c: Coarse head-averaged map, one row per coarse query.
        child_q: Children of each coarse query.
        child_k: Children of each coarse key.
        top_s: Keys selected per coarse query.
    """
    if map_c.n_queries != len(child_q) or map_c.n_keys != len(child_k):
        raise ContractViolationError(
            f"map is {map_c.n_queries}x{map_c.n_keys} but the trees have "
            f"{len(child_q)} coarse queries and {len(child_k)} coarse keys"
        )
    selected: list[IndexArray] = []
    coarse_keys: list[IndexArray] = []
    for i in range(map_c.n_queries):
        cols, scores = map_c.row(i)
        picked = cols[topk_indices(scores, top_s)]
        selected.append(picked)
        coarse_keys.append(np.unique(np.concatenate([child_k[s] for s in picked])))

    # every dense query copies its parent's key list
    query_parent = _parents_of(child_q)
    per_coarse = np.array([k.shape[0] for k in coarse_keys], dtype=np.int64)
    coarse_offsets = segment_offsets(per_coarse)
    flat = np.concatenate(coarse_keys).astype(np.int64)
    lengths = per_coarse[query_parent]
    offsets = segment_offsets(lengths)
    gather = np.repeat(coarse_offsets[query_parent] - offsets[:-1], lengths) + np.arange(offsets[-1])
    return AttendedRegions(offsets, flat[gather], tuple(selected), query_parent)


def check_region_soundness(regions: AttendedRegions, key_parent: IndexArray) -> None:
    """Verify every attended key's parent was selected for the query's parent.

    Raises:
        ContractViolationError: Naming the first offending query.
    """
    sizes = regions.sizes()
    if np.any(sizes == 0):
        raise ContractViolationError(f"query {int(np.argmin(sizes))} has an empty region")
    n_coarse_keys = int(key_parent.max()) + 1 if key_parent.shape[0] else 0
    allowed = np.concatenate(
        [i * n_coarse_keys + sel for i, sel in enumerate(regions.selected)]
    )
    rows = np.repeat(np.arange(regions.n_queries), sizes)
    pairs = regions.query_parent[rows] * n_coarse_keys + key_parent[regions.columns]
    ok = np.isin(pairs, allowed)
    if not np.all(ok):
        bad = int(rows[np.argmin(ok)])
        raise ContractViolationError(f"query {bad} attends a key outside its selected coarse keys")
