"""The two-track network, its inputs, losses and checkpoints."""

from molscale.model.batch import Batch, collate
from molscale.model.block import BlockOutput, forward_block
from molscale.model.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from molscale.model.config import PRESETS, ModelConfig, get_preset
from molscale.model.embeddings import embed_atoms, embed_pairs
from molscale.model.heads import lm_head, position_head
from molscale.model.losses import LossBundle, compute_losses
from molscale.model.network import ForwardOutput, batch_losses, forward
from molscale.model.noising import (
    IGNORE_INDEX,
    NoisedSample,
    make_noised_sample,
    masked_count,
    sample_rng,
)
from molscale.model.params import ModelState, count_parameters, init_state, parameter_shapes
from molscale.model.verify import model_gradient_check

__all__ = [
    "Batch",
    "BlockOutput",
    "Checkpoint",
    "ForwardOutput",
    "IGNORE_INDEX",
    "LossBundle",
    "ModelConfig",
    "ModelState",
    "NoisedSample",
    "PRESETS",
    "batch_losses",
    "collate",
    "compute_losses",
    "count_parameters",
    "embed_atoms",
    "embed_pairs",
    "forward",
    "forward_block",
    "get_preset",
    "init_state",
    "lm_head",
    "load_checkpoint",
    "make_noised_sample",
    "masked_count",
    "model_gradient_check",
    "parameter_shapes",
    "position_head",
    "sample_rng",
    "save_checkpoint",
]
