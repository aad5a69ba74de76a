"""Small building blocks shared by the blocks and heads."""

import math

import numpy as np

from molscale.diffcore import (
    Tensor,
    add,
    einsum,
    gelu,
    layer_norm,
    linear,
    mul,
    permute,
    reshape,
    softmax,
)
from molscale.model.params import ParameterScope


def norm(params: ParameterScope, name: str, x: Tensor) -> Tensor:
    return layer_norm(x, params[f"{name}.weight"], params[f"{name}.bias"])


def dense(params: ParameterScope, name: str, x: Tensor) -> Tensor:
    return linear(x, params[f"{name}.weight"], params.get(f"{name}.bias"))


def feed_forward(params: ParameterScope, name: str, x: Tensor) -> Tensor:
    """Two linear layers with a GELU between them."""
    return dense(params, f"{name}.fc2", gelu(dense(params, f"{name}.fc1", x)))


def split_heads(x: Tensor, heads: int) -> Tensor:
    """``[B, N, d] -> [B, H, N, d/H]``."""
    batch, atoms, dim = x.shape
    return permute(reshape(x, (batch, atoms, heads, dim // heads)), (0, 2, 1, 3))


def attention_weights(
    params: ParameterScope, q: Tensor, k: Tensor, pair: Tensor, key_bias: np.ndarray, heads: int
) -> Tensor:
    """softmax(Q Kᵀ / sqrt(d/h) + pair bias + key mask) as ``[B, H, N, N]``."""
    head_dim = q.shape[-1] // heads
    qh, kh = split_heads(q, heads), split_heads(k, heads)
    scores = mul(einsum("bhid,bhjd->bhij", qh, kh), 1.0 / math.sqrt(head_dim))
    pair_bias = permute(dense(params, "pair_bias", pair), (0, 3, 1, 2))
    scores = add(add(scores, pair_bias), Tensor(key_bias, dtype=scores.dtype.type))
    return softmax(scores, axis=-1)
