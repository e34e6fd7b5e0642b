"""Exhaustive nearest-neighbour search."""

from __future__ import annotations

import numpy as np

from pttreg.constants import NN_BLOCK_PAIRS
from pttreg.numerics.linalg import IndexArray, Matrix
from pttreg.utils.exceptions import EmptyCloudError


def nearest_neighbors(queries: Matrix, targets: Matrix) -> tuple[IndexArray, np.ndarray]:
    """For each query row, the closest target row and the squared distance.

    Ties go to the lowest target index. Work is O(len(queries) * len(targets)),
    processed in blocks of queries.
    """
    if targets.shape[0] == 0:
        raise EmptyCloudError("nearest-neighbour target set is empty")
    n = queries.shape[0]
    block = max(1, NN_BLOCK_PAIRS // targets.shape[0])
    index = np.empty(n, dtype=np.int64)
    dist2 = np.empty(n, dtype=np.float64)
    for start in range(0, n, block):
        diff = queries[start : start + block, None, :] - targets[None, :, :]
        d2 = np.einsum("qtk,qtk->qt", diff, diff)
        best = np.argmin(d2, axis=1)
        index[start : start + block] = best
        dist2[start : start + block] = d2[np.arange(best.shape[0]), best]
    return index, dist2


def pairwise_sq_distances(a: Matrix, b: Matrix) -> Matrix:
    """Full (len(a), len(b)) matrix of squared distances."""
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)
