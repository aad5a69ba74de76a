"""Goodness-of-fit metrics between predicted and actual losses."""

from collections.abc import Sequence
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from molscale.errors import DomainError, ShapeMismatchError


@dataclass(frozen=True)
class FitMetrics:
    """Metric values; ``None`` marks a metric undefined for the inputs (division by zero)."""

    mae: float
    rmae: Optional[float]
    mse: float
    r_squared: Optional[float]
    pearson: Optional[float]

    def as_dict(self) -> dict[str, Optional[float]]:
        return asdict(self)


def fit_metrics(predicted: Sequence[float], actual: Sequence[float]) -> FitMetrics:
    pred = np.asarray(predicted, dtype=np.float64)
    act = np.asarray(actual, dtype=np.float64)
    if pred.shape != act.shape or pred.ndim != 1:
        raise ShapeMismatchError(f"predicted {pred.shape} and actual {act.shape} must be equal-length vectors")
    if pred.size == 0:
        raise DomainError("metrics need at least one point")

    error = pred - act
    mae = float(np.mean(np.abs(error)))
    mse = float(np.mean(error * error))
    rmae = None if np.any(act == 0) else float(np.mean(np.abs(error) / np.abs(act)))

    ss_tot = float(np.sum((act - act.mean()) ** 2))
    r_squared = None if ss_tot == 0 else 1.0 - float(np.sum(error * error)) / ss_tot

    pred_dev, act_dev = pred - pred.mean(), act - act.mean()
    denom = float(np.sqrt(np.sum(pred_dev**2) * np.sum(act_dev**2)))
    pearson = None if denom == 0 else float(np.clip(np.sum(pred_dev * act_dev) / denom, -1.0, 1.0))

    return FitMetrics(mae=mae, rmae=rmae, mse=mse, r_squared=r_squared, pearson=pearson)
