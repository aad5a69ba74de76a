"""Minimal dense-tensor core with reverse-mode gradients."""

from molscale.diffcore.ops import (
    PRIMITIVES,
    add,
    concat,
    cross_entropy,
    einsum,
    embedding_lookup,
    gaussian_density,
    gelu,
    l1_loss,
    layer_norm,
    linear,
    matmul,
    mean,
    mul,
    pairwise_distance,
    permute,
    reshape,
    sigmoid,
    softmax,
    sub,
    transpose,
)
from molscale.diffcore.ops import sum as sum_
from molscale.diffcore.tensor import (
    Tensor,
    as_tensor,
    backward,
    default_dtype,
    get_default_dtype,
    is_grad_enabled,
    no_grad,
)

__all__ = [
    "PRIMITIVES",
    "Tensor",
    "add",
    "as_tensor",
    "backward",
    "concat",
    "cross_entropy",
    "default_dtype",
    "einsum",
    "embedding_lookup",
    "gaussian_density",
    "gelu",
    "get_default_dtype",
    "is_grad_enabled",
    "l1_loss",
    "layer_norm",
    "linear",
    "matmul",
    "mean",
    "mul",
    "no_grad",
    "pairwise_distance",
    "permute",
    "reshape",
    "sigmoid",
    "softmax",
    "sub",
    "sum_",
    "transpose",
]
