"""Full forward pass: embeddings, N blocks, both heads."""

from dataclasses import dataclass, field

from molscale.diffcore import Tensor
from molscale.errors import MoleculeTooLargeError
from molscale.model.batch import Batch
from molscale.model.block import forward_block
from molscale.model.embeddings import embed_atoms, embed_pairs
from molscale.model.heads import lm_head, position_head
from molscale.model.losses import LossBundle, compute_losses
from molscale.model.params import ModelState


@dataclass
class ForwardOutput:
    logits: Tensor
    r_pcoor: Tensor
    x: Tensor
    p: Tensor
    attention: list[Tensor] = field(default_factory=list)


def forward(state: ModelState, batch: Batch, return_attention: bool = False) -> ForwardOutput:
    cfg = state.config
    longest = int(batch.lengths.max())
    if longest > cfg.max_atoms:
        raise MoleculeTooLargeError(f"batch holds a molecule of {longest} atoms, limit is {cfg.max_atoms}")

    dtype = state.dtype.type
    key_bias = batch.key_bias(dtype)
    pair_mask = batch.pair_mask
    x, p = embed_atoms(state, batch), embed_pairs(state, batch)
    attention = []
    for layer in range(cfg.layers):
        out = forward_block(
            state.scope(f"blocks.{layer}"), cfg, x, p, key_bias, pair_mask, return_attention
        )
        x, p = out.x, out.p
        if return_attention:
            attention.append(out.attention)

    logits = lm_head(state.scope("lm_head"), x)
    r_pcoor = position_head(state.scope("pos_head"), cfg, x, p, batch.noised_coords, key_bias)
    return ForwardOutput(logits, r_pcoor, x, p, attention)


def batch_losses(state: ModelState, batch: Batch) -> LossBundle:
    """Forward pass and losses for one batch."""
    out = forward(state, batch)
    return compute_losses(out.logits, out.r_pcoor, batch)
