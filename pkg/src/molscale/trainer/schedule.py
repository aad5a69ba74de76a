"""Learning-rate schedule: linear warmup, then polynomial (power 1) decay to zero."""

from molscale.errors import DomainError
from molscale.trainer.config import TrainConfig


def lr_at(step: int, cfg: TrainConfig) -> float:
    if step < 0:
        raise DomainError(f"step must be non-negative, got {step}")
    if step < cfg.warmup_steps:
        return cfg.peak_lr * step / cfg.warmup_steps
    if step >= cfg.total_steps:
        return 0.0
    return cfg.peak_lr * (cfg.total_steps - step) / (cfg.total_steps - cfg.warmup_steps)
