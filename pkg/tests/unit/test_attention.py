"""Unit tests for multi-head attention and positional encoding."""

from __future__ import annotations

import numpy as np
import pytest

from pttreg.attention.encoding import sinusoidal_pe
from pttreg.attention.mha import AttentionMap, multihead_attention, ragged_multihead_attention
from pttreg.attention.weights import MhaWeights
from pttreg.numerics.linalg import segment_offsets
from pttreg.utils.exceptions import ConfigError, ContractViolationError, EmptyAttentionRowError


def _loop_attention(fq: np.ndarray, fk: np.ndarray, w: MhaWeights) -> np.ndarray:
    """Straight-line per-head, per-query attention."""
    d_k = w.head_dim
    out = np.zeros((fq.shape[0], w.heads * d_k))
    for h in range(w.heads):
        cols = slice(h * d_k, (h + 1) * d_k)
        for i in range(fq.shape[0]):
            q = fq[i] @ w.w_q[:, cols]
            logits = np.array([q @ (fk[j] @ w.w_k[:, cols]) for j in range(fk.shape[0])]) / np.sqrt(d_k)
            p = np.exp(logits - logits.max())
            p /= p.sum()
            out[i, cols] = sum(p[j] * (fk[j] @ w.w_v[:, cols]) for j in range(fk.shape[0]))
    return out @ w.w_o


class TestMultiheadAttention:
    """Tests for dense multi-head attention."""

    def test_single_query_single_key(self, mha_weights: MhaWeights, rng: np.random.Generator) -> None:
        """One key gets the whole weight and the output is its projected value."""
        fq, fk = rng.normal(size=(1, 12)), rng.normal(size=(1, 12))
        out = multihead_attention(fq, fk, mha_weights)
        np.testing.assert_allclose(out.map.to_dense(), [[1.0]])
        np.testing.assert_allclose(out.features, fk @ mha_weights.w_v @ mha_weights.w_o, atol=1e-12)

    def test_identical_keys_give_uniform_map(self, mha_weights: MhaWeights, rng: np.random.Generator) -> None:
        """Equal keys are weighted equally."""
        fk = np.tile(rng.normal(size=(1, 12)), (5, 1))
        out = multihead_attention(rng.normal(size=(3, 12)), fk, mha_weights)
        np.testing.assert_allclose(out.map.to_dense(), np.full((3, 5), 0.2), atol=1e-15)

    def test_matches_loop_oracle(self, mha_weights: MhaWeights, rng: np.random.Generator) -> None:
        """Vectorised heads agree with a per-head loop."""
        fq, fk = rng.normal(size=(7, 12)), rng.normal(size=(9, 12))
        out = multihead_attention(fq, fk, mha_weights)
        np.testing.assert_allclose(out.features, _loop_attention(fq, fk, mha_weights), rtol=1e-10, atol=1e-12)

    def test_single_head(self, rng: np.random.Generator) -> None:
        """H=1 reduces to plain scaled dot-product attention."""
        w = MhaWeights.random(12, 1, seed=5)
        fq, fk = rng.normal(size=(4, 12)), rng.normal(size=(6, 12))
        out = multihead_attention(fq, fk, w)
        np.testing.assert_allclose(out.features, _loop_attention(fq, fk, w), rtol=1e-10, atol=1e-12)

    def test_permutation_equivariance(self, mha_weights: MhaWeights, rng: np.random.Generator) -> None:
        """Permuting queries permutes outputs; permuting keys changes nothing."""
        fq, fk = rng.normal(size=(6, 12)), rng.normal(size=(8, 12))
        base = multihead_attention(fq, fk, mha_weights).features
        pq, pk = rng.permutation(6), rng.permutation(8)
        moved = multihead_attention(fq[pq], fk[pk], mha_weights).features
        np.testing.assert_allclose(moved, base[pq], rtol=1e-10, atol=1e-12)

    def test_map_rows_sum_to_one(self, mha_weights: MhaWeights, rng: np.random.Generator) -> None:
        """The head-averaged map is row-stochastic."""
        out = multihead_attention(rng.normal(size=(5, 12)), rng.normal(size=(7, 12)), mha_weights)
        np.testing.assert_allclose(out.map.row_sums(), np.ones(5), atol=1e-12)

    def test_masked_entries_are_zero(self, mha_weights: MhaWeights, rng: np.random.Generator) -> None:
        """Invalid keys receive no weight."""
        mask = np.array([[True, False, True], [False, True, False]])
        out = multihead_attention(rng.normal(size=(2, 12)), rng.normal(size=(3, 12)), mha_weights, mask)
        dense = out.map.to_dense()
        assert np.all(dense[~mask] == 0.0)
        assert out.map.nnz == 3

    def test_fully_masked_row(self, mha_weights: MhaWeights, rng: np.random.Generator) -> None:
        """A query with no valid key is an error."""
        mask = np.array([[True, True], [False, False]])
        with pytest.raises(EmptyAttentionRowError):
            multihead_attention(rng.normal(size=(2, 12)), rng.normal(size=(2, 12)), mha_weights, mask)

    def test_width_mismatch(self, mha_weights: MhaWeights, rng: np.random.Generator) -> None:
        """Features must match the projection width."""
        with pytest.raises(ContractViolationError):
            multihead_attention(rng.normal(size=(2, 6)), rng.normal(size=(2, 12)), mha_weights)

    def test_buffer_is_logit_size(self, mha_weights: MhaWeights, rng: np.random.Generator) -> None:
        """Dense attention reports one H x n_q x n_k float64 buffer."""
        out = multihead_attention(rng.normal(size=(3, 12)), rng.normal(size=(4, 12)), mha_weights)
        assert out.buffer_bytes == 2 * 3 * 4 * 8


class TestRaggedAttention:
    """Tests for row-compressed attention."""

    def test_full_rows_match_dense(self, mha_weights: MhaWeights, rng: np.random.Generator) -> None:
        """Listing every key for every query reproduces dense attention."""
        fq, fk = rng.normal(size=(5, 12)), rng.normal(size=(6, 12))
        offsets = segment_offsets([6] * 5)
        columns = np.tile(np.arange(6), 5)
        dense = multihead_attention(fq, fk, mha_weights)
        ragged = ragged_multihead_attention(fq, fk, offsets, columns, mha_weights)
        np.testing.assert_allclose(ragged.features, dense.features, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(ragged.map.to_dense(), dense.map.to_dense(), rtol=1e-10, atol=1e-15)

    def test_matches_masked_dense(self, mha_weights: MhaWeights, rng: np.random.Generator) -> None:
        """Ragged rows equal dense attention under the equivalent mask."""
        fq, fk = rng.normal(size=(4, 12)), rng.normal(size=(5, 12))
        rows = [[0, 2], [1], [0, 1, 2, 3, 4], [4]]
        mask = np.zeros((4, 5), dtype=bool)
        for i, cols in enumerate(rows):
            mask[i, cols] = True
        offsets = segment_offsets([len(r) for r in rows])
        columns = np.concatenate([np.array(r) for r in rows])
        ragged = ragged_multihead_attention(fq, fk, offsets, columns, mha_weights)
        dense = multihead_attention(fq, fk, mha_weights, mask)
        np.testing.assert_allclose(ragged.features, dense.features, rtol=1e-10, atol=1e-12)

    def test_small_blocks_agree(self, mha_weights: MhaWeights, rng: np.random.Generator) -> None:
        """Block size does not change the result."""
        fq, fk = rng.normal(size=(9, 12)), rng.normal(size=(4, 12))
        offsets = segment_offsets([2, 3, 1, 4, 2, 1, 3, 4, 2])
        columns = np.concatenate([np.sort(rng.choice(4, n, replace=False)) for n in np.diff(offsets)])
        a = ragged_multihead_attention(fq, fk, offsets, columns, mha_weights)
        b = ragged_multihead_attention(fq, fk, offsets, columns, mha_weights, block=2)
        np.testing.assert_allclose(a.features, b.features, rtol=1e-12, atol=1e-14)
        assert a.buffer_bytes == b.buffer_bytes == columns.shape[0] * 2 * 8

    def test_region_of_one(self, mha_weights: MhaWeights, rng: np.random.Generator) -> None:
        """A single attended key yields its projected value."""
        fq, fk = rng.normal(size=(1, 12)), rng.normal(size=(3, 12))
        out = ragged_multihead_attention(fq, fk, segment_offsets([1]), np.array([2]), mha_weights)
        np.testing.assert_allclose(out.features, fk[[2]] @ mha_weights.w_v @ mha_weights.w_o, atol=1e-12)
        np.testing.assert_allclose(out.map.scores, [1.0])

    def test_empty_row(self, mha_weights: MhaWeights, rng: np.random.Generator) -> None:
        """A query that lists no keys is an error."""
        with pytest.raises(EmptyAttentionRowError):
            ragged_multihead_attention(
                rng.normal(size=(2, 12)), rng.normal(size=(2, 12)),
                segment_offsets([2, 0]), np.array([0, 1]), mha_weights,
            )

    def test_key_out_of_range(self, mha_weights: MhaWeights, rng: np.random.Generator) -> None:
        """Key indices must address existing keys."""
        with pytest.raises(ContractViolationError):
            ragged_multihead_attention(
                rng.normal(size=(1, 12)), rng.normal(size=(2, 12)),
                segment_offsets([1]), np.array([2]), mha_weights,
            )


class TestAttentionMap:
    """Tests for the compressed map container."""

    def test_dense_round_trip(self) -> None:
        """from_dense and to_dense are inverse when no mask is given."""
        m = np.array([[0.25, 0.75], [1.0, 0.0]])
        amap = AttentionMap.from_dense(m)
        np.testing.assert_array_equal(amap.to_dense(), m)
        cols, scores = amap.row(0)
        np.testing.assert_array_equal(cols, [0, 1])
        np.testing.assert_array_equal(scores, [0.25, 0.75])


class TestPositionalEncoding:
    """Tests for the sinusoidal coordinate encoding."""

    def test_origin(self) -> None:
        """At the origin sines are 0 and cosines are 1."""
        pe = sinusoidal_pe(np.zeros((1, 3)), 12)
        np.testing.assert_array_equal(pe[0, 0::2], np.zeros(6))
        np.testing.assert_array_equal(pe[0, 1::2], np.ones(6))

    def test_closed_form(self) -> None:
        """Column 2k of axis a is sin(x_a / base**(6k/D))."""
        coords = np.array([[0.3, -1.2, 2.5]])
        d = 18
        pe = sinusoidal_pe(coords, d)
        for axis in range(3):
            for k in range(3):
                freq = 10000.0 ** (-6.0 * k / d)
                col = axis * (d // 3) + 2 * k
                assert pe[0, col] == pytest.approx(np.sin(coords[0, axis] * freq), abs=1e-15)
                assert pe[0, col + 1] == pytest.approx(np.cos(coords[0, axis] * freq), abs=1e-15)

    def test_bounded(self, rng: np.random.Generator) -> None:
        """Every entry lies in [-1, 1]."""
        pe = sinusoidal_pe(rng.uniform(-100, 100, size=(50, 3)), 24)
        assert pe.shape == (50, 24)
        assert np.abs(pe).max() <= 1.0

    @pytest.mark.parametrize("d_model", [8, 10, 0])
    def test_width_not_divisible_by_six(self, d_model: int) -> None:
        """Widths that do not split into per-axis sin/cos pairs are rejected."""
        with pytest.raises(ConfigError):
            sinusoidal_pe(np.zeros((1, 3)), d_model)
