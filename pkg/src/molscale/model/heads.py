"""Output heads: masked atom-type logits and predicted coordinates."""

import numpy as np

from molscale.diffcore import Tensor, add, einsum, gelu, mul, permute, reshape
from molscale.errors import ShapeMismatchError
from molscale.model.config import ModelConfig
from molscale.model.layers import attention_weights, dense, norm, split_heads
from molscale.model.params import ParameterScope


def lm_head(params: ParameterScope, x: Tensor) -> Tensor:
    """Logits over the 119 atom types, ``[B, N, 119]``."""
    h = norm(params, "input_norm", x)
    h = norm(params, "norm", gelu(dense(params, "dense", h)))
    return dense(params, "out", h)


def position_head(
    params: ParameterScope,
    cfg: ModelConfig,
    x: Tensor,
    p: Tensor,
    noised_coords: np.ndarray,
    key_bias: np.ndarray,
) -> Tensor:
    """Predict coordinates as the noised input plus an attention-weighted displacement.

    Attention weights multiply the relative positions r_i - r_j before the
    values are aggregated, so the displacement is translation invariant.
    """
    batch, atoms = x.shape[:2]
    if noised_coords.shape != (batch, atoms, 3):
        raise ShapeMismatchError(f"coordinates {noised_coords.shape} do not match atoms {x.shape}")
    dtype = x.dtype.type
    hx, hp = norm(params, "atom_norm", x), norm(params, "pair_norm", p)
    attn = attention_weights(params, dense(params, "q", hx), dense(params, "k", hx), hp, key_bias, cfg.heads)
    values = split_heads(dense(params, "v", hx), cfg.heads)

    delta = noised_coords[:, :, None, :] - noised_coords[:, None, :, :]
    weighted = mul(reshape(attn, attn.shape + (1,)), Tensor(delta[:, None], dtype=dtype))
    context = einsum("bhijk,bhjd->bhikd", weighted, values)
    context = reshape(permute(context, (0, 2, 3, 1, 4)), (batch, atoms, 3, cfg.embed_dim))
    displacement = dense(params, "ffn.fc2", gelu(dense(params, "ffn.fc1", context)))
    return add(reshape(displacement, (batch, atoms, 3)), Tensor(noised_coords, dtype=dtype))
