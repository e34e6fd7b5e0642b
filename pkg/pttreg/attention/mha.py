"""Multi-head scaled dot-product attention, dense and ragged."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pttreg.attention.weights import MhaWeights
from pttreg.constants import ATTENTION_QUERY_BLOCK
from pttreg.numerics.linalg import IndexArray, Mask, Matrix, segment_offsets, segment_softmax, softmax_rows
from pttreg.utils.exceptions import ContractViolationError, EmptyAttentionRowError


@dataclass(frozen=True, slots=True)
class AttentionMap:
    """Head-averaged attention weights stored row-compressed.

    Row i covers ``offsets[i]:offsets[i+1]`` of ``columns`` (ascending key
    indices) and ``scores`` (weights summing to 1 over the row).
    """

    offsets: IndexArray
    columns: IndexArray
    scores: Matrix
    n_keys: int

    @property
    def n_queries(self) -> int:
        return int(self.offsets.shape[0]) - 1

    @property
    def nnz(self) -> int:
        return int(self.columns.shape[0])

    def row(self, i: int) -> tuple[IndexArray, Matrix]:
        lo, hi = self.offsets[i], self.offsets[i + 1]
        return self.columns[lo:hi], self.scores[lo:hi]

    def row_lengths(self) -> IndexArray:
        return np.diff(self.offsets)

    def row_sums(self) -> Matrix:
        rows = np.repeat(np.arange(self.n_queries), self.row_lengths())
        return np.bincount(rows, weights=self.scores, minlength=self.n_queries)

    def to_dense(self) -> Matrix:
        dense = np.zeros((self.n_queries, self.n_keys))
        rows = np.repeat(np.arange(self.n_queries), self.row_lengths())
        dense[rows, self.columns] = self.scores
        return dense

    @classmethod
    def from_dense(cls, m: Matrix, mask: Mask | None = None) -> AttentionMap:
        """Compress a dense map, keeping every entry or only the valid ones."""
        n_q, n_k = m.shape
        keep = np.ones_like(m, dtype=bool) if mask is None else mask
        rows, cols = np.nonzero(keep)
        return cls(
            segment_offsets(keep.sum(axis=1)),
            cols.astype(np.int64),
            m[rows, cols].astype(np.float64),
            n_k,
        )


@dataclass(frozen=True, slots=True)
class AttentionOutput:
    features: Matrix
    map: AttentionMap
    buffer_bytes: int = 0


def _check_inputs(fq: Matrix, fk: Matrix, w: MhaWeights) -> None:
    if fq.ndim != 2 or fk.ndim != 2:
        raise ContractViolationError(f"attention inputs must be 2-D, got {fq.shape} and {fk.shape}")
    if fq.shape[1] != w.d_model or fk.shape[1] != w.d_model:
        raise ContractViolationError(
            f"feature widths {fq.shape[1]}/{fk.shape[1]} do not match weights D={w.d_model}"
        )


def _split_heads(f: Matrix, proj: Matrix, w: MhaWeights) -> np.ndarray:
    return (f @ proj).reshape(f.shape[0], w.heads, w.head_dim)


def multihead_attention(
    fq: Matrix, fk: Matrix, w: MhaWeights, mask: Mask | None = None
) -> AttentionOutput:
    """Dense multi-head attention of queries fq over keys fk.

    Per head h: ``softmax(Q_h K_hᵀ / sqrt(d_k)) V_h``; heads are concatenated
    and projected by W^O. The returned map is the mean of the per-head
    softmax matrices.

    Args:
        fq: (n_q, D) query features.
        fk: (n_k, D) key features (also used for values).
        w: Projection weights.
        mask: Optional (n_q, n_k) validity flags.

    Raises:
        EmptyAttentionRowError: If a query has no valid key.
    """
    _check_inputs(fq, fk, w)
    if fk.shape[0] == 0 and fq.shape[0] > 0:
        raise EmptyAttentionRowError(0)
    q = _split_heads(fq, w.w_q, w)
    k = _split_heads(fk, w.w_k, w)
    v = _split_heads(fk, w.w_v, w)
    logits = np.einsum("qhd,khd->hqk", q, k) / np.sqrt(w.head_dim)
    probs = np.stack([softmax_rows(logits[h], mask) for h in range(w.heads)])
    heads = np.einsum("hqk,khd->qhd", probs, v).reshape(fq.shape[0], -1)
    return AttentionOutput(
        features=heads @ w.w_o,
        map=AttentionMap.from_dense(probs.mean(axis=0), mask),
        buffer_bytes=int(logits.nbytes),
    )


def ragged_multihead_attention(
    fq: Matrix,
    fk: Matrix,
    offsets: IndexArray,
    columns: IndexArray,
    w: MhaWeights,
    *,
    block: int = ATTENTION_QUERY_BLOCK,
) -> AttentionOutput:
    """Multi-head attention where query i sees only ``columns[offsets[i]:offsets[i+1]]``.

    Same arithmetic as multihead_attention with every other key masked out;
    only the listed (query, key) pairs are ever evaluated. Queries are
    processed in blocks, and ``buffer_bytes`` totals the logit buffers.

    Raises:
        EmptyAttentionRowError: If some query lists no key.
        ContractViolationError: On malformed offsets or key indices.
    """
    _check_inputs(fq, fk, w)
    n_q = fq.shape[0]
    if offsets.shape != (n_q + 1,) or offsets[0] != 0 or offsets[-1] != columns.shape[0]:
        raise ContractViolationError("row offsets do not match queries and key lists")
    if columns.shape[0] and (columns.min() < 0 or columns.max() >= fk.shape[0]):
        raise ContractViolationError("attended key index out of range")
    lengths = np.diff(offsets)
    if np.any(lengths <= 0):
        raise EmptyAttentionRowError(int(np.argmin(lengths)))

    q = _split_heads(fq, w.w_q, w)
    k = _split_heads(fk, w.w_k, w)
    v = _split_heads(fk, w.w_v, w)
    scale = 1.0 / np.sqrt(w.head_dim)
    heads = np.zeros((n_q, w.heads, w.head_dim))
    scores = np.empty(columns.shape[0])
    buffer_bytes = 0
    for start in range(0, n_q, block):
        stop = min(start + block, n_q)
        local = offsets[start : stop + 1] - offsets[start]
        lo, hi = offsets[start], offsets[stop]
        cols = columns[lo:hi]
        rows = np.repeat(np.arange(start, stop), lengths[start:stop])
        logits = np.einsum("nhd,nhd->nh", q[rows], k[cols]) * scale
        buffer_bytes += int(logits.nbytes)
        probs = segment_softmax(logits, local)
        heads[start:stop] = np.add.reduceat(probs[:, :, None] * v[cols], local[:-1], axis=0)
        scores[lo:hi] = probs.mean(axis=1)
    return AttentionOutput(
        features=heads.reshape(n_q, -1) @ w.w_o,
        map=AttentionMap(offsets.astype(np.int64), columns.astype(np.int64), scores, fk.shape[0]),
        buffer_bytes=buffer_bytes,
    )
