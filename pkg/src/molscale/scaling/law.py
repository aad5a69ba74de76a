"""Three-term power law for validation loss against model size, steps and compute.

    L(M, S) = a_m * M**b_m + a_s * S**b_s + a_c * (M * S)**b_c

M is in millions of parameters, S in optimizer steps, and C = M * S.
"""

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError
from scipy.optimize import least_squares, nnls

from molscale.errors import DatasetIOError, DomainError, InsufficientDataError, ParseError

logger = logging.getLogger(__name__)

MIN_OBSERVATIONS = 12
BETA_GRID = (-0.05, -0.25, -0.5, -1.0, -1.5)
TERMS = ("m", "s", "c")

ArrayLike = Union[float, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class ScalingObservation:
    """Validation loss of a model of ``m`` million parameters after ``s`` steps."""

    m: float
    s: float
    loss: float

    def __post_init__(self) -> None:
        if not (self.m > 0 and self.s > 0 and self.loss > 0):
            raise DomainError(f"observation needs positive m, s and loss, got {self}")

    @property
    def c(self) -> float:
        return self.m * self.s


class ScalingLawFit(BaseModel):
    """Fitted coefficients plus solver diagnostics."""

    alpha_m: float
    beta_m: float
    alpha_s: float
    beta_s: float
    alpha_c: float
    beta_c: float
    residual: float = 0.0
    converged: bool = True
    iterations: int = 0

    @property
    def alphas(self) -> tuple[float, float, float]:
        return self.alpha_m, self.alpha_s, self.alpha_c

    @property
    def betas(self) -> tuple[float, float, float]:
        return self.beta_m, self.beta_s, self.beta_c

    def predict(self, m: ArrayLike, s: ArrayLike) -> Union[float, np.ndarray]:
        return evaluate(self, m, s)

    def terms(self, m: ArrayLike, s: ArrayLike) -> np.ndarray:
        """Each term's contribution, stacked as ``[3, ...]``."""
        m, s = _positive(m, "m"), _positive(s, "s")
        return np.stack(
            [
                self.alpha_m * m**self.beta_m,
                self.alpha_s * s**self.beta_s,
                self.alpha_c * (m * s) ** self.beta_c,
            ]
        )


# Published coefficients for the 42M-310M runs, in the same units.
PUBLISHED_FIT = ScalingLawFit(
    alpha_m=2.660, beta_m=-1.137, alpha_s=1.848, beta_s=-0.225, alpha_c=0.588, beta_c=-1.479
)


def _positive(values: ArrayLike, name: str) -> np.ndarray:
    array = np.asarray(values, dtype=np.float64)
    if np.any(~(array > 0)):
        raise DomainError(f"{name} must be positive, got {values}")
    return array


def evaluate(fit: ScalingLawFit, m: ArrayLike, s: ArrayLike) -> Union[float, np.ndarray]:
    """Predicted loss at model size ``m`` (millions) and step count ``s``."""
    total = fit.terms(m, s).sum(axis=0)
    return float(total) if total.ndim == 0 else total


def _design(log_x: np.ndarray, betas: np.ndarray) -> np.ndarray:
    """Columns x_k ** beta_k for the three terms."""
    return np.exp(log_x * betas)


def _residuals(theta: np.ndarray, log_x: np.ndarray, loss: np.ndarray) -> np.ndarray:
    log_alpha, beta = theta[0::2], theta[1::2]
    return np.exp(log_alpha + log_x * beta).sum(axis=1) - loss


def _jacobian(theta: np.ndarray, log_x: np.ndarray, loss: np.ndarray) -> np.ndarray:
    log_alpha, beta = theta[0::2], theta[1::2]
    terms = np.exp(log_alpha + log_x * beta)
    jac = np.empty((len(loss), 6))
    jac[:, 0::2] = terms
    jac[:, 1::2] = terms * log_x
    return jac


def _initial_theta(betas: tuple[float, ...], log_x: np.ndarray, loss: np.ndarray) -> np.ndarray:
    """Non-negative least-squares alphas for fixed exponents."""
    betas_arr = np.asarray(betas)
    alphas, _ = nnls(_design(log_x, betas_arr), loss)
    theta = np.empty(6)
    theta[0::2] = np.log(np.maximum(alphas, 1e-12))
    theta[1::2] = betas_arr
    return theta


def filter_observations(
    observations: Iterable[ScalingObservation], min_step: float = 200_000, stride: Optional[int] = 10_000
) -> list[ScalingObservation]:
    """Drop the early-training points and keep one point per ``stride`` steps."""
    kept = []
    for obs in observations:
        if obs.s < min_step:
            continue
        if stride and obs.s % stride:
            continue
        kept.append(obs)
    return kept


def fit(
    observations: Iterable[ScalingObservation],
    min_step: float = 200_000,
    stride: Optional[int] = 10_000,
) -> ScalingLawFit:
    """Levenberg-Marquardt fit on (log alpha, beta), started from every point of a beta grid.

    The lowest residual wins; ties go to the earlier grid point.
    """
    kept = filter_observations(observations, min_step, stride)
    if len(kept) < MIN_OBSERVATIONS:
        raise InsufficientDataError(
            f"need at least {MIN_OBSERVATIONS} observations after filtering, have {len(kept)}"
        )
    if len({obs.m for obs in kept}) < 2:
        raise InsufficientDataError("need observations from at least two model sizes")

    m = np.array([obs.m for obs in kept])
    s = np.array([obs.s for obs in kept])
    loss = np.array([obs.loss for obs in kept])
    log_x = np.log(np.column_stack([m, s, m * s]))

    best = None
    for betas in product(BETA_GRID, repeat=3):
        theta0 = _initial_theta(betas, log_x, loss)
        with np.errstate(over="ignore", invalid="ignore"):
            result = least_squares(
                _residuals,
                theta0,
                jac=_jacobian,
                args=(log_x, loss),
                method="lm",
                xtol=1e-15,
                ftol=1e-15,
                gtol=1e-15,
                max_nfev=4000,
            )
        if not np.all(np.isfinite(result.fun)):
            continue
        cost = float(np.linalg.norm(result.fun))
        if best is None or cost < best[0]:
            best = (cost, result)

    if best is None:
        raise InsufficientDataError("every multi-start solve diverged")
    cost, result = best
    theta = result.x
    fitted = ScalingLawFit(
        alpha_m=float(np.exp(theta[0])),
        beta_m=float(theta[1]),
        alpha_s=float(np.exp(theta[2])),
        beta_s=float(theta[3]),
        alpha_c=float(np.exp(theta[4])),
        beta_c=float(theta[5]),
        residual=cost,
        converged=bool(result.status > 0),
        iterations=int(result.nfev),
    )
    if not fitted.converged:
        logger.warning(f"Scaling fit did not converge: {result.message}")
    for term, beta in zip(TERMS, fitted.betas):
        if beta >= 0:
            logger.warning(f"Fitted exponent beta_{term} = {beta:.3f} is not negative")
    logger.info(f"Fitted scaling law on {len(kept)} observations, residual norm {cost:.3e}")
    return fitted


def observations_from_log(
    frame: pd.DataFrame,
    params_millions: float,
    min_step: float = 0,
    stride: Optional[int] = None,
    column: str = "loss_total",
) -> list[ScalingObservation]:
    """Turn loss-log rows into observations for a model of ``params_millions``."""
    if column not in frame.columns or "step" not in frame.columns:
        raise ParseError(f"loss log needs 'step' and '{column}' columns")
    observations = [
        ScalingObservation(float(params_millions), float(step), float(value))
        for step, value in zip(frame["step"], frame[column])
        if step > 0
    ]
    return filter_observations(observations, min_step, stride)


def save_fit(fit_result: ScalingLawFit, path: Path) -> None:
    Path(path).write_text(
        fit_result.model_dump_json(indent=2, exclude={"iterations"}), encoding="utf-8"
    )


def load_fit(path: Path) -> ScalingLawFit:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DatasetIOError(f"cannot read fit file {path}: {e}") from e
    try:
        return ScalingLawFit.model_validate_json(text)
    except ValidationError as e:
        raise ParseError(f"invalid fit file {path}: {e.errors()[0]['msg']}") from e
