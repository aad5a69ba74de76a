"""End-to-end gradient check of the full network in 64-bit mode."""

import logging

import numpy as np

from molscale.diffcore import default_dtype
from molscale.diffcore.gradcheck import GradCheckResult, check_gradients
from molscale.model.batch import collate
from molscale.model.config import ModelConfig
from molscale.model.network import batch_losses
from molscale.model.noising import make_noised_sample
from molscale.model.params import init_state
from molscale.molgraph.synthetic import synthetic_dataset

logger = logging.getLogger(__name__)


def model_gradient_check(
    cfg: ModelConfig,
    samples: int = 50,
    seed: int = 0,
    molecules: int = 2,
    tolerance: float = 1e-3,
) -> GradCheckResult:
    """Compare d(loss_total)/d(theta) with central differences on ``samples`` random parameters."""
    rng = np.random.default_rng(seed)
    graphs = synthetic_dataset(molecules, seed=seed, min_atoms=4, max_atoms=min(8, cfg.max_atoms))
    batch = collate([make_noised_sample(g, rng) for g in graphs], cfg.max_atoms)
    with default_dtype(np.float64):
        state = init_state(cfg, seed, dtype=np.float64)
        result = check_gradients(
            lambda: batch_losses(state, batch).tensor,
            list(state.params.values()),
            name=f"model:{cfg.name}",
            tolerance=tolerance,
            samples=samples,
            rng=rng,
        )
    logger.info(f"End-to-end gradient check on {cfg.name}: rel error {result.rel_error:.2e}")
    return result
