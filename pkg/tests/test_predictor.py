import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qextrap.predictor import (
    FitCoefficients,
    PredictorConfig,
    WeightWindow,
    adap_distance,
    evaluate_fit,
    fit_quadratic,
    fit_quadratic_columns,
    nap_distance,
    predict_weights,
)

finite_floats = st.floats(-50, 50, allow_nan=False)


def quadratic_window(a, b, c, p):
    x = np.arange(1, p)
    return (a * x * x + b * x + c).reshape(-1, 1)


class TestQuadraticFit:
    def test_exact_square(self):
        fit = fit_quadratic(np.array([1.0, 4.0, 9.0]))
        assert (fit.a, fit.b, fit.c) == pytest.approx((1.0, 0.0, 0.0), abs=1e-12)

    def test_constant(self):
        fit = fit_quadratic(np.array([5.0, 5.0, 5.0, 5.0]))
        assert (fit.a, fit.b, fit.c) == pytest.approx((0.0, 0.0, 5.0), abs=1e-12)

    def test_exact_line(self):
        fit = fit_quadratic(np.array([2.0, 4.0, 6.0]))
        assert (fit.a, fit.b, fit.c) == pytest.approx((0.0, 2.0, 0.0), abs=1e-12)

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            fit_quadratic(np.array([1.0, 2.0]))

    @settings(max_examples=200, deadline=None)
    @given(finite_floats, finite_floats, finite_floats, st.integers(3, 8))
    def test_recovers_any_quadratic(self, a, b, c, npoints):
        x = np.arange(1, npoints + 1, dtype=float)
        fit = fit_quadratic(a * x * x + b * x + c)
        assert abs(fit.a - a) <= 1e-9
        assert abs(fit.b - b) <= 1e-9
        assert abs(fit.c - c) <= 1e-9

    @settings(max_examples=100, deadline=None)
    @given(finite_floats, finite_floats, finite_floats, st.floats(0, 30), st.integers(3, 8))
    def test_extrapolates_exactly(self, a, b, c, d, npoints):
        x = np.arange(1, npoints + 1, dtype=float)
        fit = fit_quadratic(a * x * x + b * x + c)
        expected = a * d * d + b * d + c
        assert evaluate_fit(fit, d) == pytest.approx(expected, abs=1e-9, rel=1e-9)

    def test_column_fit_matches_per_column(self, rng):
        ys = rng.normal(size=(5, 7))
        a, b, c = fit_quadratic_columns(ys)
        for j in range(7):
            fit = fit_quadratic(ys[:, j])
            assert (a[j], b[j], c[j]) == pytest.approx((fit.a, fit.b, fit.c), abs=1e-12)

    def test_least_squares_beats_perturbations(self, rng):
        # the returned coefficients minimize the squared residual
        ys = rng.normal(size=6)
        fit = fit_quadratic(ys)
        x = np.arange(1, 7, dtype=float)

        def sse(a, b, c):
            return np.sum((a * x * x + b * x + c - ys) ** 2)

        base = sse(fit.a, fit.b, fit.c)
        for da, db, dc in ((1e-3, 0, 0), (0, 1e-3, 0), (0, 0, 1e-3), (-1e-3, 1e-3, 0)):
            assert base <= sse(fit.a + da, fit.b + db, fit.c + dc) + 1e-12


class TestDecayedDistance:
    CFG = PredictorConfig(p=5, d0_init=3.0, r=0.95, method="nap", alpha=0.1)

    def test_spot_value(self):
        assert nap_distance(5, self.CFG) == pytest.approx(0.95 * 3 + 4, abs=1e-12)

    def test_large_epoch_limit(self):
        assert nap_distance(10_000_000, self.CFG) == pytest.approx(self.CFG.p - 1, abs=1e-9)

    def test_zero_initial_distance(self):
        cfg = PredictorConfig(p=5, d0_init=0.0, method="nap", alpha=0.1)
        for i in (5, 10, 50):
            assert nap_distance(i, cfg) == cfg.p - 1

    def test_strictly_decreasing(self):
        values = [nap_distance(i, self.CFG) for i in (5, 10, 15, 20, 100)]
        assert all(a > b for a, b in zip(values, values[1:]))
        assert all(self.CFG.p - 1 < v <= self.CFG.d0_init + self.CFG.p - 1 for v in values)

    def test_no_decay_at_unit_rate(self):
        cfg = PredictorConfig(p=4, d0_init=2.0, r=1.0, method="nap", alpha=0.1)
        assert nap_distance(4, cfg) == nap_distance(400, cfg) == 5.0


class TestAdaptiveDistance:
    CFG = PredictorConfig(p=4, d0_init=5.0, k=0.01, n_max=12.0, alpha=0.1, method="adap")

    def test_flat_slope_gives_lower_bound(self):
        fit = FitCoefficients(a=0.0, b=0.0, c=2.0)
        assert adap_distance(fit, self.CFG) == pytest.approx(self.CFG.p - 1)

    def test_slope_cancelling_curvature(self):
        # s = 2a(p-1) + b = 0 exactly
        fit = FitCoefficients(a=1.0, b=-2.0 * (self.CFG.p - 1), c=0.0)
        assert adap_distance(fit, self.CFG) == pytest.approx(self.CFG.p - 1)

    def test_saturates_at_upper_bound(self):
        fit = FitCoefficients(a=0.0, b=1e9, c=0.0)
        assert adap_distance(fit, self.CFG) == pytest.approx(self.CFG.n_max + self.CFG.p - 1)

    def test_linear_history_plugin_value(self):
        cfg = PredictorConfig(p=4, k=0.01, n_max=12.0, alpha=0.1, epsilon=1e-6, method="adap")
        fit = FitCoefficients(a=0.0, b=1.0, c=0.0)
        # d0 = 0.01 * 1 / 1e-6 = 1e4, fully saturated exponential
        assert adap_distance(fit, cfg) == pytest.approx(12.0 + 3.0, abs=1e-6)

    @settings(max_examples=300, deadline=None)
    @given(finite_floats, finite_floats, finite_floats)
    def test_range_invariant(self, a, b, c):
        d = adap_distance(FitCoefficients(a, b, c), self.CFG)
        assert self.CFG.p - 1 <= d < self.CFG.n_max + self.CFG.p - 1

    @settings(max_examples=100, deadline=None)
    @given(finite_floats, finite_floats, finite_floats, st.floats(0.1, 20))
    def test_distance_invariant_under_history_scaling(self, a, b, c, scale):
        # scaling slope and curvature together cancels in |s|/|curv|; the
        # epsilon guard perturbs the ratio at the 1e-5 level, and scaling
        # epsilon along removes even that
        d1 = adap_distance(FitCoefficients(a, b, c), self.CFG)
        d2 = adap_distance(FitCoefficients(a * scale, b * scale, c * scale), self.CFG)
        assert d1 == pytest.approx(d2, abs=5e-3)
        from dataclasses import replace

        cfg_scaled = replace(self.CFG, epsilon=self.CFG.epsilon * scale)
        d3 = adap_distance(FitCoefficients(a * scale, b * scale, c * scale), cfg_scaled)
        assert d1 == pytest.approx(d3, rel=1e-9, abs=1e-9)


class TestPredictWeights:
    def test_exact_fit_extrapolation_at_fixed_distance(self):
        # r = 1 keeps the shared distance at d0 + p - 1 = 5 for every epoch
        cfg = PredictorConfig(p=4, d0_init=2.0, r=1.0, method="nap", alpha=0.1)
        window = np.array([[1.0], [4.0], [9.0]])
        predicted = predict_weights(window, 4, cfg)
        assert predicted[0] == pytest.approx(25.0, abs=1e-9)

    def test_constant_history_predicts_constant(self):
        for method in ("nap", "adap"):
            cfg = PredictorConfig(p=4, method=method, alpha=0.1)
            window = np.full((3, 2), 3.25)
            np.testing.assert_allclose(predict_weights(window, 4, cfg), [3.25, 3.25])

    def test_lower_bound_distance_returns_latest_weight(self):
        cfg = PredictorConfig(p=4, d0_init=0.0, method="nap", alpha=0.1)
        window = np.array([[1.0, 0.0], [4.0, 1.0], [9.0, -1.0]])
        np.testing.assert_allclose(predict_weights(window, 4, cfg), window[-1], atol=1e-9)

    def test_runaway_prediction_falls_back_to_current(self):
        cfg = PredictorConfig(p=4, d0_init=20.0, r=1.0, method="nap", alpha=0.1)
        window = np.array([[0.0], [1e4], [2e4]])
        assert predict_weights(window, 4, cfg)[0] == 2e4

    def test_window_size_enforced(self):
        cfg = PredictorConfig(p=5, method="adap", alpha=0.1)
        with pytest.raises(ValueError):
            predict_weights(np.zeros((3, 2)), 5, cfg)

    def test_vanilla_never_predicts(self):
        cfg = PredictorConfig(p=4, method="vanilla", alpha=0.1)
        with pytest.raises(ValueError):
            predict_weights(np.zeros((3, 2)), 4, cfg)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10_000), st.floats(-5, 5, allow_nan=False), st.sampled_from(["nap", "adap"]))
    def test_shift_equivariance(self, seed, shift, method):
        cfg = PredictorConfig(p=5, method=method, alpha=0.1)
        window = np.random.default_rng(seed).normal(size=(4, 3))
        base = predict_weights(window, 5, cfg)
        shifted = predict_weights(window + shift, 5, cfg)
        np.testing.assert_allclose(shifted, base + shift, atol=1e-8)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.1, 10, allow_nan=False), st.sampled_from(["nap", "adap"]))
    def test_scale_equivariance(self, seed, scale, method):
        # the adaptive distance is scale-free once epsilon is scaled along
        # (see test_distance_invariant_under_history_scaling)
        cfg = PredictorConfig(p=5, method=method, alpha=0.1, epsilon=1e-6 * scale)
        base_cfg = PredictorConfig(p=5, method=method, alpha=0.1)
        window = np.random.default_rng(seed).normal(size=(4, 3))
        base = predict_weights(window, 5, base_cfg)
        scaled = predict_weights(window * scale, 5, cfg)
        np.testing.assert_allclose(scaled, base * scale, rtol=1e-8, atol=1e-8)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.sampled_from(["nap", "adap"]))
    def test_column_permutation_equivariance(self, seed, method):
        cfg = PredictorConfig(p=5, method=method, alpha=0.1)
        rng = np.random.default_rng(seed)
        window = rng.normal(size=(4, 5))
        perm = rng.permutation(5)
        base = predict_weights(window, 5, cfg)
        permuted = predict_weights(window[:, perm], 5, cfg)
        np.testing.assert_allclose(permuted, base[perm], atol=1e-10)

    @settings(max_examples=60, deadline=None)
    @given(finite_floats, finite_floats, finite_floats, st.sampled_from(["nap", "adap"]))
    def test_exact_quadratic_trajectories_extrapolated_exactly(self, a, b, c, method):
        cfg = PredictorConfig(p=6, method=method, alpha=0.1)
        x = np.arange(1, 6, dtype=float)
        window = (a * x * x + b * x + c).reshape(-1, 1)
        predicted = predict_weights(window, 6, cfg)[0]
        if method == "nap":
            d = nap_distance(6, cfg)
        else:
            d = adap_distance(fit_quadratic(window[:, 0]), cfg)
        expected = a * d * d + b * d + c
        if abs(expected - window[-1, 0]) <= 1e3:
            assert predicted == pytest.approx(expected, abs=1e-9, rel=1e-9)

    def test_window_wrapper_type(self):
        w = WeightWindow(np.zeros((4, 2)))
        assert w.num_samples == 4 and w.num_params == 2
        cfg = PredictorConfig(p=5, method="adap", alpha=0.1)
        np.testing.assert_allclose(predict_weights(w, 5, cfg), np.zeros(2))


class TestConfigValidation:
    def test_minimum_interval(self):
        with pytest.raises(ValueError):
            PredictorConfig(p=3)

    def test_decay_rate_range(self):
        with pytest.raises(ValueError):
            PredictorConfig(r=0.0)
        with pytest.raises(ValueError):
            PredictorConfig(r=1.5)

    def test_positive_constants(self):
        for kwargs in ({"k": 0.0}, {"n_max": -1.0}, {"epsilon": 0.0}):
            with pytest.raises(ValueError):
                PredictorConfig(**kwargs)

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            PredictorConfig(method="magic")
