"""Dense float64 linear algebra used by every other subpackage."""

from pttreg.numerics.linalg import (
    IndexArray,
    Matrix,
    as_matrix,
    layer_norm,
    linear_forward,
    matmul,
    mlp2,
    relu,
    sigmoid,
    softmax_rows,
    topk_indices,
    topk_rows,
)
from pttreg.numerics.rng import make_rng
from pttreg.numerics.svd import svd_3x3

__all__ = [
    "IndexArray",
    "Matrix",
    "as_matrix",
    "layer_norm",
    "linear_forward",
    "make_rng",
    "matmul",
    "mlp2",
    "relu",
    "sigmoid",
    "softmax_rows",
    "svd_3x3",
    "topk_indices",
    "topk_rows",
]
