"""One two-track block: pair-biased self-attention on atoms, outer product and
triangular updates on pairs. Pre-norm with residuals throughout.
"""

from typing import NamedTuple, Optional

import numpy as np

from molscale.diffcore import Tensor, add, einsum, mul, permute, reshape, sigmoid
from molscale.errors import ShapeMismatchError
from molscale.model.config import ModelConfig
from molscale.model.layers import attention_weights, dense, feed_forward, norm, split_heads
from molscale.model.params import ParameterScope


class BlockOutput(NamedTuple):
    x: Tensor
    p: Tensor
    attention: Optional[Tensor] = None


def _self_attention(
    params: ParameterScope, cfg: ModelConfig, h: Tensor, p: Tensor, key_bias: np.ndarray
) -> tuple[Tensor, Tensor]:
    attn = attention_weights(
        params, dense(params, "q", h), dense(params, "k", h), p, key_bias, cfg.heads
    )
    context = einsum("bhij,bhjd->bhid", attn, split_heads(dense(params, "v", h), cfg.heads))
    batch, atoms, dim = h.shape
    merged = reshape(permute(context, (0, 2, 1, 3)), (batch, atoms, dim))
    return dense(params, "out", merged), attn


def _outer_product(params: ParameterScope, h: Tensor) -> Tensor:
    """update[i][j] = W · vec(left_i ⊗ right_j) + bias."""
    left, right = dense(params, "left", h), dense(params, "right", h)
    partial = einsum("bjs,asc->bjac", right, params["proj.weight"])
    return add(einsum("bia,bjac->bijc", left, partial), params["proj.bias"])


def _gated(params: ParameterScope, name: str, h: Tensor, mask: Tensor) -> Tensor:
    return mul(mul(sigmoid(dense(params, f"{name}_gate", h)), dense(params, name, h)), mask)


def _triangular_update(params: ParameterScope, h: Tensor, pair_mask: np.ndarray) -> Tensor:
    mask = Tensor(pair_mask[..., None].astype(h.dtype), dtype=h.dtype.type)
    outgoing = einsum(
        "bikc,bjkc->bijc",
        _gated(params, "out_left", h, mask),
        _gated(params, "out_right", h, mask),
    )
    incoming = einsum(
        "bkic,bkjc->bijc",
        _gated(params, "in_left", h, mask),
        _gated(params, "in_right", h, mask),
    )
    mixed = dense(params, "proj", norm(params, "out_norm", add(outgoing, incoming)))
    return mul(sigmoid(dense(params, "gate", h)), mixed)


def forward_block(
    params: ParameterScope,
    cfg: ModelConfig,
    x: Tensor,
    p: Tensor,
    key_bias: np.ndarray,
    pair_mask: np.ndarray,
    return_attention: bool = False,
) -> BlockOutput:
    """Advance ``x [B, N, d]`` and ``p [B, N, N, d_p]`` by one block."""
    batch, atoms = x.shape[:2]
    if x.shape != (batch, atoms, cfg.embed_dim) or p.shape != (batch, atoms, atoms, cfg.pair_dim):
        raise ShapeMismatchError(f"block inputs {x.shape} and {p.shape} do not fit the config")

    # atom track
    attended, attn = _self_attention(params.scope("attn"), cfg, norm(params, "attn_norm", x), p, key_bias)
    x_mid = add(x, attended)
    x_out = add(x_mid, feed_forward(params, "ffn", norm(params, "ffn_norm", x_mid)))

    # pair track, fed by the updated atom track
    outer = params.scope("outer")
    p = add(p, _outer_product(outer, norm(outer, "norm", x_out)))
    tri = params.scope("tri")
    p = add(p, _triangular_update(tri, norm(tri, "norm", p), pair_mask))
    p = add(p, feed_forward(params, "pair_ffn", norm(params, "pair_ffn_norm", p)))
    return BlockOutput(x_out, p, attn if return_attention else None)
