"""Tests for the scaling-law fit and goodness-of-fit metrics."""

from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from molscale.errors import DomainError, InsufficientDataError, ParseError, ShapeMismatchError
from molscale.scaling import (
    PUBLISHED_FIT,
    ScalingLawFit,
    ScalingObservation,
    filter_observations,
    fit,
    fit_metrics,
    load_fit,
    observations_from_log,
    save_fit,
)

SIZES = (42.0, 84.0, 164.0, 310.0)
STEPS = np.arange(200_000, 800_001, 10_000)


def planted(noise: float = 0.0, seed: int = 0) -> list[ScalingObservation]:
    rng = np.random.default_rng(seed)
    return [
        ScalingObservation(m, float(s), PUBLISHED_FIT.predict(m, s) + noise * rng.normal())
        for m in SIZES
        for s in STEPS
    ]


class TestLaw:
    """Tests for evaluating the three-term law."""

    def test_published_anchor_points(self):
        """Test the published coefficients at the large-model anchors."""
        assert PUBLISHED_FIT.predict(570, 810_000) == pytest.approx(0.088, abs=1e-3)
        assert PUBLISHED_FIT.predict(1100, 810_000) == pytest.approx(0.0871, abs=1e-3)
        assert PUBLISHED_FIT.predict(84, 810_000) == pytest.approx(0.104, abs=2e-3)

    def test_zero_alphas(self):
        """Test that all-zero coefficients predict zero loss."""
        zero = ScalingLawFit(alpha_m=0, beta_m=-1, alpha_s=0, beta_s=-1, alpha_c=0, beta_c=-1)
        assert zero.predict(100, 1000) == 0.0

    def test_vectorised_prediction(self):
        """Test that arrays of sizes and steps predict elementwise."""
        out = PUBLISHED_FIT.predict([42, 84], [300_000, 300_000])
        assert out.shape == (2,)
        assert out[0] > out[1]

    def test_terms_sum_to_prediction(self):
        """Test that the per-term breakdown adds up."""
        terms = PUBLISHED_FIT.terms(164, 500_000)
        assert terms.sum() == pytest.approx(PUBLISHED_FIT.predict(164, 500_000))

    def test_decreasing_in_size_and_steps(self):
        """Test that the published law falls strictly as either size or steps grow."""
        sizes = np.geomspace(10, 5_000, 30)
        steps = np.geomspace(1_000, 5_000_000, 30)
        assert np.all(np.diff(PUBLISHED_FIT.predict(sizes, 300_000)) < 0)
        assert np.all(np.diff(PUBLISHED_FIT.predict(164, steps)) < 0)

    def test_non_positive_inputs(self):
        """Test that zero steps or sizes are outside the domain."""
        with pytest.raises(DomainError):
            PUBLISHED_FIT.predict(100, 0)
        with pytest.raises(DomainError):
            PUBLISHED_FIT.predict(-1, 1000)


class TestFit:
    """Tests for the multi-start Levenberg-Marquardt fit."""

    def test_recovers_noiseless_law(self):
        """Test that fitting exact points extrapolates like the planted law."""
        fitted = fit(planted())
        assert fitted.residual < 1e-6
        assert fitted.predict(1100, 810_000) == pytest.approx(
            PUBLISHED_FIT.predict(1100, 810_000), abs=1e-3
        )

    def test_recovers_step_term(self):
        """Test that the dominant step term comes back within 2%."""
        fitted = fit(planted())
        assert fitted.alpha_s == pytest.approx(PUBLISHED_FIT.alpha_s, rel=0.02)
        assert fitted.beta_s == pytest.approx(PUBLISHED_FIT.beta_s, rel=0.02)
        assert fitted.residual < 1e-8

    def test_step_only_data(self):
        """Test that data from the step term alone leaves the other terms negligible."""
        step_only = PUBLISHED_FIT.model_copy(update={"alpha_m": 0.0, "alpha_c": 0.0})
        obs = [
            ScalingObservation(m, float(s), step_only.predict(m, s)) for m in SIZES for s in STEPS
        ]
        fitted = fit(obs)
        m = np.array([o.m for o in obs])
        s = np.array([o.s for o in obs])
        terms = fitted.terms(m, s)
        assert np.all((terms[0] + terms[2]) < 0.05 * terms.sum(axis=0))

    def test_noisy_points(self):
        """Test that small noise still gives a close extrapolation."""
        fitted = fit(planted(noise=1e-3, seed=3))
        assert fitted.predict(1100, 810_000) == pytest.approx(
            PUBLISHED_FIT.predict(1100, 810_000), abs=3e-3
        )

    def test_too_few_points(self):
        """Test that eleven points are not enough."""
        with pytest.raises(InsufficientDataError):
            fit(planted()[:11], stride=None)

    def test_single_model_size(self):
        """Test that one model size cannot separate the size and step terms."""
        with pytest.raises(InsufficientDataError):
            fit([obs for obs in planted() if obs.m == 42.0])

    def test_early_steps_filtered(self):
        """Test that points before the minimum step are dropped."""
        early = [ScalingObservation(m, s, 1.0) for m in SIZES for s in (1_000.0, 50_000.0)]
        assert filter_observations(early, min_step=200_000) == []
        with pytest.raises(InsufficientDataError):
            fit(early)

    def test_stride(self):
        """Test that only steps on the stride are kept."""
        obs = [ScalingObservation(42, s, 1.0) for s in (200_000, 205_000, 210_000)]
        assert [o.s for o in filter_observations(obs, stride=10_000)] == [200_000, 210_000]


class TestFitFiles:
    """Tests for fit persistence and loss-log conversion."""

    def test_save_then_load(self, tmp_path: Path):
        """Test that coefficients survive a save and load."""
        path = tmp_path / "fit.json"
        save_fit(PUBLISHED_FIT, path)
        loaded = load_fit(path)
        assert loaded.alphas == PUBLISHED_FIT.alphas
        assert loaded.betas == PUBLISHED_FIT.betas

    def test_invalid_fit_file(self, tmp_path: Path):
        """Test that a fit file without coefficients is rejected."""
        path = tmp_path / "fit.json"
        path.write_text('{"alpha_m": 1.0}', encoding="utf-8")
        with pytest.raises(ParseError):
            load_fit(path)

    def test_observations_from_log(self):
        """Test turning loss-log rows into filtered observations."""
        frame = pd.DataFrame({"step": [0, 100, 200, 250, 300], "loss_total": [9, 3, 2, 1.9, 1.5]})
        obs = observations_from_log(frame, 42, min_step=150, stride=100)
        assert [(o.m, o.s, o.loss) for o in obs] == [(42, 200, 2), (42, 300, 1.5)]

    def test_log_without_loss_column(self):
        """Test that a frame lacking the loss column is rejected."""
        with pytest.raises(ParseError):
            observations_from_log(pd.DataFrame({"step": [1]}), 42)


class TestMetrics:
    """Tests for fit-quality metrics."""

    def test_hand_computed_case(self):
        """Test MAE, RMAE and MSE for predicted [2, 4] against actual [1, 2]."""
        metrics = fit_metrics([2.0, 4.0], [1.0, 2.0])
        assert metrics.mae == pytest.approx(1.5)
        assert metrics.rmae == pytest.approx(1.0)
        assert metrics.mse == pytest.approx(2.5)

    def test_perfect_prediction(self):
        """Test that identical vectors give zero error and unit correlation."""
        metrics = fit_metrics([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
        assert metrics.as_dict() == {
            "mae": 0.0,
            "rmae": 0.0,
            "mse": 0.0,
            "r_squared": 1.0,
            "pearson": pytest.approx(1.0),
        }

    def test_anticorrelated(self):
        """Test that negated predictions have Pearson -1."""
        metrics = fit_metrics([-1.0, -2.0, -3.0], [1.0, 2.0, 3.0])
        assert metrics.pearson == pytest.approx(-1.0)
        assert metrics.r_squared < 0

    def test_zero_actual_leaves_rmae_undefined(self):
        """Test that a zero actual value makes RMAE undefined."""
        metrics = fit_metrics([0.5, 1.0], [0.0, 1.0])
        assert metrics.rmae is None
        assert metrics.mae == pytest.approx(0.25)

    def test_constant_inputs(self):
        """Test that constant actual values leave R squared and Pearson undefined."""
        metrics = fit_metrics([1.0, 2.0], [3.0, 3.0])
        assert metrics.r_squared is None
        assert metrics.pearson is None

    def test_length_mismatch(self):
        """Test that unequal lengths are rejected."""
        with pytest.raises(ShapeMismatchError):
            fit_metrics([1.0, 2.0], [1.0])

    def test_empty_input(self):
        """Test that metrics need at least one point."""
        with pytest.raises(DomainError):
            fit_metrics([], [])
