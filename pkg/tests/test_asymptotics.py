"""Regime classification, exponent fitting, and drift summability."""

import numpy as np
import pytest

from meanfield_polya import (
    ModelParams,
    classify_regime,
    critical_diagnostic,
    finite_moment_sequences,
    fit_power_law,
    limit_moment_sequence,
    quasi_martingale_sum,
)


class TestClassifyRegime:
    def test_subcritical(self):
        r = classify_regime(0.2)
        assert r.label == "subcritical"
        assert r.predicted_rate == "t^(-0.4)"
        assert r.predicted_slope == pytest.approx(-0.4)

    def test_critical(self):
        r = classify_regime(0.5)
        assert r.label == "critical"
        assert r.predicted_rate == "t^(-1)*log(t)"

    def test_critical_tolerance(self):
        assert classify_regime(0.5 + 1e-13).label == "critical"
        assert classify_regime(0.5 + 1e-9).label == "supercritical"

    def test_supercritical(self):
        r = classify_regime(0.9)
        assert r.label == "supercritical"
        assert r.predicted_rate == "t^(-1)"

    @pytest.mark.parametrize("alpha", [-0.1, 1.0001])
    def test_range_check(self, alpha):
        with pytest.raises(ValueError):
            classify_regime(alpha)


class TestFitPowerLaw:
    def test_exact_power_law_recovered(self):
        t = np.arange(1, 100_001)
        fit = fit_power_law(t, 5.0 * t**-0.7, (10, 1e5))
        assert fit.slope == pytest.approx(-0.7, abs=1e-9)
        assert fit.intercept == pytest.approx(np.log(5.0), abs=1e-9)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)

    def test_window_restriction(self):
        t = np.arange(1, 10_001)
        v = 2.0 * t**-1.0
        v[:100] = 7.0  # garbage outside the window must not matter
        fit = fit_power_law(t, v, (200, 1e4))
        assert fit.slope == pytest.approx(-1.0, abs=1e-9)

    def test_too_few_points(self):
        t = np.arange(1, 12)
        with pytest.raises(ValueError, match="at least 10"):
            fit_power_law(t, 1.0 / t, (5, 9))

    def test_nonpositive_values_rejected(self):
        t = np.arange(1, 101).astype(float)
        v = 1.0 / t
        v[50] = 0.0
        with pytest.raises(ValueError, match="positive"):
            fit_power_law(t, v, (1, 100))

    @pytest.mark.parametrize("alpha,target", [(0.2, -0.4), (0.8, -1.0)])
    def test_limit_recursion_slopes(self, alpha, target):
        # smaller window than the acceptance run, so slightly wider band
        p = ModelParams(n_urns=1, red_init=1, white_init=1, alpha=alpha)
        horizon = 100_000
        fit = fit_power_law(np.arange(horizon + 1),
                            limit_moment_sequence(p, horizon), (100, horizon))
        assert fit.slope == pytest.approx(target, abs=0.06)


class TestCriticalDiagnostic:
    def test_synthetic_critical_form(self):
        t = np.arange(2, 1_000_001)
        diag = critical_diagnostic(t, 0.3 * np.log(t) / t)
        assert diag.bounded
        np.testing.assert_allclose(diag.decade_means, 0.3, rtol=1e-12)

    def test_limit_recursion_critical(self):
        p = ModelParams(n_urns=1, red_init=1, white_init=1, alpha=0.5)
        horizon = 1_000_000
        diag = critical_diagnostic(np.arange(horizon + 1),
                                   limit_moment_sequence(p, horizon))
        assert diag.bounded

    def test_subcritical_flagged_unbounded(self):
        p = ModelParams(n_urns=1, red_init=1, white_init=1, alpha=0.2)
        horizon = 1_000_000
        diag = critical_diagnostic(np.arange(horizon + 1),
                                   limit_moment_sequence(p, horizon))
        assert not diag.bounded
        assert np.all(np.diff(diag.decade_means) > 0)

    def test_range_guard(self):
        t = np.arange(2, 500)
        with pytest.raises(ValueError, match="decades"):
            critical_diagnostic(t, 1.0 / t)


class TestQuasiMartingale:
    def test_no_coupling_gives_zero(self):
        p = ModelParams(n_urns=3, red_init=1, white_init=1, alpha=0.0)
        x = finite_moment_sequences(p, 1000).x
        report = quasi_martingale_sum(p, x)
        assert report.total == 0.0
        assert np.all(report.partial_sums == 0.0)

    def test_partial_sums_cauchy(self):
        # tail increments strictly decrease decade over decade for alpha > 0
        for alpha in (0.3, 0.5, 1.0):
            p = ModelParams(n_urns=5, red_init=1, white_init=1, alpha=alpha)
            x = finite_moment_sequences(p, 100_000).x
            sums = quasi_martingale_sum(p, x).partial_sums
            increments = [sums[10**k] - sums[10 ** (k - 1)] for k in range(2, 6)]
            assert all(a > b for a, b in zip(increments, increments[1:]))

    def test_critical_tail_fraction_small_at_long_horizon(self):
        p = ModelParams(n_urns=5, red_init=1, white_init=1, alpha=0.5)
        x = finite_moment_sequences(p, 1_000_000).x
        report = quasi_martingale_sum(p, x)
        assert report.tail_fraction <= 1e-2

    def test_alpha_one_tail_regression(self):
        # terms fall like t^(-3/2); last-decade share at T=1e5 sits near 1.4%
        p = ModelParams(n_urns=5, red_init=1, white_init=1, alpha=1.0)
        x = finite_moment_sequences(p, 100_000).x
        report = quasi_martingale_sum(p, x)
        assert report.tail_fraction == pytest.approx(0.014, abs=0.004)
        assert report.total == pytest.approx(report.partial_sums[-1])
