"""Pretraining loop, optimizer, schedule, loss log and checkpoint rotation."""

from molscale.trainer.checkpoints import CheckpointManager
from molscale.trainer.config import TrainConfig
from molscale.trainer.logbook import LOG_COLUMNS, LossLog, LossLogRow, read_loss_log
from molscale.trainer.loop import (
    LOSS_LOG_NAME,
    VALIDATION_LOG_NAME,
    Trainer,
    TrainResult,
    batch_stream,
    evaluate_dataset,
    split_dataset,
    train,
)
from molscale.trainer.optim import AdamW, adamw_step, clip_gradients
from molscale.trainer.schedule import lr_at

__all__ = [
    "AdamW",
    "CheckpointManager",
    "LOG_COLUMNS",
    "LOSS_LOG_NAME",
    "LossLog",
    "LossLogRow",
    "TrainConfig",
    "TrainResult",
    "Trainer",
    "VALIDATION_LOG_NAME",
    "adamw_step",
    "batch_stream",
    "clip_gradients",
    "evaluate_dataset",
    "lr_at",
    "read_loss_log",
    "split_dataset",
    "train",
]
