"""Training hyperparameters."""

from pydantic import BaseModel, ConfigDict, Field, model_validator


class TrainConfig(BaseModel):
    """Optimizer, schedule, data and checkpoint settings for one pretraining run."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    # Optimizer and schedule
    peak_lr: float = Field(default=1e-4, gt=0)
    warmup_steps: int = Field(default=20, gt=0)
    total_steps: int = Field(default=200, gt=0)
    betas: tuple[float, float] = (0.9, 0.99)
    eps: float = Field(default=1e-8, gt=0)
    weight_decay: float = Field(default=1e-4, ge=0)
    clip_norm: float = Field(default=1.0, gt=0)

    # Data
    token_budget: int = Field(default=256, gt=0)
    bucket_width: int = Field(default=8, gt=0)
    tau: float = Field(default=0.005, gt=0)
    mask_rate: float = Field(default=0.15, gt=0, le=1)
    noise_sigma: float = Field(default=0.2, ge=0)
    feature_mask_p: float = Field(default=0.5, ge=0, le=1)
    seed: int = 0

    # Bookkeeping
    checkpoint_every: int = Field(default=1000, gt=0)
    checkpoint_keep: int = Field(default=10, gt=0)
    log_every: int = Field(default=10, gt=0)
    async_checkpoints: bool = False

    # Held-out validation; a zero fraction trains on everything and skips evaluation
    validation_fraction: float = Field(default=0.0, ge=0, lt=1)
    eval_every: int = Field(default=1000, gt=0)

    @model_validator(mode="after")
    def _check_schedule(self) -> "TrainConfig":
        if self.warmup_steps >= self.total_steps:
            raise ValueError(
                f"warmup_steps ({self.warmup_steps}) must be below total_steps ({self.total_steps})"
            )
        if not all(0 <= beta < 1 for beta in self.betas):
            raise ValueError(f"betas must lie in [0, 1), got {self.betas}")
        return self
