"""Scaling-law fitting, extrapolation and fit-quality metrics."""

from molscale.scaling.law import (
    PUBLISHED_FIT,
    ScalingLawFit,
    ScalingObservation,
    evaluate,
    filter_observations,
    fit,
    load_fit,
    observations_from_log,
    save_fit,
)
from molscale.scaling.metrics import FitMetrics, fit_metrics

__all__ = [
    "FitMetrics",
    "PUBLISHED_FIT",
    "ScalingLawFit",
    "ScalingObservation",
    "evaluate",
    "filter_observations",
    "fit",
    "fit_metrics",
    "load_fit",
    "observations_from_log",
    "save_fit",
]
