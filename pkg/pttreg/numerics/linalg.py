"""Dense float64 kernels: products, masked softmax, top-k, affine layers."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from pttreg.constants import PROBABILITY_EPS
from pttreg.utils.exceptions import ContractViolationError, EmptyAttentionRowError

Matrix = NDArray[np.float64]
IndexArray = NDArray[np.int64]
Mask = NDArray[np.bool_]


def as_matrix(values: ArrayLike, *, name: str = "matrix") -> Matrix:
    """Coerce values to a finite 2-D float64 array.

    Raises:
        ContractViolationError: If the input is not 2-D or holds NaN/Inf.
    """
    m = np.asarray(values, dtype=np.float64)
    if m.ndim != 2:
        raise ContractViolationError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ContractViolationError(f"{name} contains non-finite entries")
    return m


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Matrix product with an explicit dimension contract."""
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ContractViolationError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def softmax_rows(m: Matrix, mask: Mask | None = None) -> Matrix:
    """Row-wise softmax restricted to valid entries.

    Masked entries come out exactly 0. Each row is shifted by its maximum
    valid entry before exponentiation.

    Args:
        m: Logits, shape (rows, cols).
        mask: Optional validity flags with the same shape; True means valid.

    Returns:
        Row-stochastic matrix of the same shape.

    Raises:
        EmptyAttentionRowError: If some row has no valid entry.
    """
    if m.ndim != 2:
        raise ContractViolationError(f"softmax expects a 2-D input, got {m.shape}")
    if mask is None:
        if m.shape[1] == 0 and m.shape[0] > 0:
            raise EmptyAttentionRowError(0)
        shifted = m - m.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)

    if mask.shape != m.shape:
        raise ContractViolationError(f"mask shape {mask.shape} != logits shape {m.shape}")
    valid_rows = mask.any(axis=1)
    if not np.all(valid_rows):
        raise EmptyAttentionRowError(int(np.argmin(valid_rows)))
    row_max = np.where(mask, m, -np.inf).max(axis=1, keepdims=True)
    e = np.where(mask, np.exp(np.where(mask, m - row_max, 0.0)), 0.0)
    return e / e.sum(axis=1, keepdims=True)


def topk_indices(row: NDArray[np.float64], k: int) -> IndexArray:
    """Positions of the min(k, len(row)) largest entries, ascending.

    Ties go to the lowest position.
    """
    if k < 1:
        raise ContractViolationError(f"k must be >= 1, got {k}")
    k = min(k, row.shape[0])
    # stable sort on the negated row keeps equal values in position order
    order = np.argsort(-row, kind="stable")[:k]
    return np.sort(order).astype(np.int64)


def topk_rows(m: Matrix, k: int) -> list[IndexArray]:
    """Per-row column indices of the k largest entries (see topk_indices)."""
    if m.ndim != 2:
        raise ContractViolationError(f"topk expects a 2-D input, got {m.shape}")
    return [topk_indices(row, k) for row in m]


def linear_forward(x: Matrix, w: Matrix, b: ArrayLike) -> Matrix:
    """Affine map x @ w + b with b broadcast over rows."""
    bias = np.asarray(b, dtype=np.float64).reshape(-1)
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ContractViolationError(f"cannot apply weights {w.shape} to input {x.shape}")
    if bias.shape[0] != w.shape[1]:
        raise ContractViolationError(f"bias length {bias.shape[0]} != output width {w.shape[1]}")
    return x @ w + bias


def relu(x: Matrix) -> Matrix:
    return np.maximum(x, 0.0)


def sigmoid(x: Matrix) -> Matrix:
    """Logistic function clamped to [eps, 1 - eps]."""
    out = 0.5 * (1.0 + np.tanh(0.5 * x))
    return np.clip(out, PROBABILITY_EPS, 1.0 - PROBABILITY_EPS)


def mlp2(x: Matrix, w1: Matrix, b1: ArrayLike, w2: Matrix, b2: ArrayLike) -> Matrix:
    """Two-layer perceptron relu(x w1 + b1) w2 + b2."""
    return linear_forward(relu(linear_forward(x, w1, b1)), w2, b2)


def layer_norm(x: Matrix, gamma: ArrayLike, beta: ArrayLike, eps: float = 1e-5) -> Matrix:
    """Normalise each row to zero mean/unit variance, then scale and shift."""
    mean = x.mean(axis=1, keepdims=True)
    var = x.var(axis=1, keepdims=True)
    g = np.asarray(gamma, dtype=np.float64).reshape(-1)
    s = np.asarray(beta, dtype=np.float64).reshape(-1)
    if g.shape[0] != x.shape[1] or s.shape[0] != x.shape[1]:
        raise ContractViolationError(f"norm parameters do not match width {x.shape[1]}")
    return (x - mean) / np.sqrt(var + eps) * g + s


def segment_offsets(lengths: Sequence[int] | NDArray[np.int64]) -> IndexArray:
    """CSR offsets (length n+1) for segments of the given lengths."""
    lengths = np.asarray(lengths, dtype=np.int64)
    offsets = np.zeros(lengths.shape[0] + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    return offsets


def segment_softmax(logits: NDArray[np.float64], offsets: IndexArray) -> NDArray[np.float64]:
    """Softmax over consecutive segments of a flat array.

    Args:
        logits: Shape (nnz,) or (nnz, h); the softmax runs along axis 0 per segment.
        offsets: CSR offsets; every segment must be nonempty.
    """
    lengths = np.diff(offsets)
    if np.any(lengths == 0):
        raise EmptyAttentionRowError(int(np.argmin(lengths)))
    starts = offsets[:-1]
    seg_max = np.maximum.reduceat(logits, starts, axis=0)
    e = np.exp(logits - np.repeat(seg_max, lengths, axis=0))
    seg_sum = np.add.reduceat(e, starts, axis=0)
    return e / np.repeat(seg_sum, lengths, axis=0)
