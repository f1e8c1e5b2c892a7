"""Moment recursions vs the enumeration oracle and hand-derived anchors."""

from fractions import Fraction

import numpy as np
import pytest

from meanfield_polya import (
    ModelParams,
    closed_form_x,
    exact_enumeration_moments,
    exact_moment_sequence,
    finite_moment_sequences,
    finite_n_moment_step,
    initial_moment_state,
    limit_moment_sequence,
    limit_moment_step,
    recursion_coefficients,
)
from meanfield_polya.moments import LimitMomentState


def params(n=2, a=1, b=1, alpha=0.5):
    return ModelParams(n_urns=n, red_init=a, white_init=b, alpha=alpha)


class TestAnchors:
    """Values derived by hand enumeration of the first draws."""

    @pytest.mark.parametrize("alpha", [0.0, 0.3, 0.9, 1.0])
    def test_two_urn_first_step(self, alpha):
        s1 = finite_n_moment_step(params(alpha=alpha), initial_moment_state())
        assert s1.x == pytest.approx(1 / 72, abs=1e-16)
        assert s1.v == pytest.approx(1 / 72, abs=1e-16)

    def test_two_urn_first_step_exact(self):
        s1 = finite_n_moment_step(params(alpha=0.5), initial_moment_state(exact=True))
        assert s1.x == Fraction(1, 72)
        assert s1.v == Fraction(1, 72)

    def test_first_step_dispersion_ignores_alpha(self):
        # x_1 = ((N-1)/N) (mu - mu^2) / (m+1)^2 regardless of coupling
        lo = finite_n_moment_step(params(alpha=0.3), initial_moment_state())
        hi = finite_n_moment_step(params(alpha=0.9), initial_moment_state())
        assert lo.x == hi.x

    def test_single_urn_variance(self):
        s1 = finite_n_moment_step(params(n=1, alpha=0.2), initial_moment_state())
        assert s1.v == pytest.approx(1 / 36, abs=1e-16)
        assert s1.x == 0.0

    def test_single_urn_closed_form_variance(self):
        # classical single urn with one ball of each color: Var(Z_t) = t / (12 (t+2))
        seqs = finite_moment_sequences(params(n=1, alpha=0.8), 200)
        want = np.array([t / (12 * (t + 2)) for t in range(201)])
        np.testing.assert_allclose(seqs.v, want, atol=1e-15)
        assert np.all(seqs.x == 0.0)

    def test_limit_first_steps(self):
        p = params(alpha=0.5)
        x = limit_moment_sequence(p, 2)
        assert x[0] == 0.0
        assert x[1] == pytest.approx(1 / 36, abs=1e-16)
        assert x[2] == pytest.approx(7 / 192, abs=1e-16)

    def test_limit_step_matches_sequence(self):
        p = params(a=2, b=1, alpha=0.7)
        seq = limit_moment_sequence(p, 50)
        s = LimitMomentState(t=0, x_inf=0.0)
        for t in range(50):
            s = limit_moment_step(p, s)
            assert s.x_inf == pytest.approx(seq[t + 1], rel=1e-12)


class TestEnumerationOracle:
    def test_hand_enumerated_two_urns(self):
        m = exact_enumeration_moments(params(alpha=0.5), 1)
        assert m.x == Fraction(1, 72)
        assert m.v == Fraction(1, 72)
        assert m.mean == Fraction(1, 2)

    @pytest.mark.parametrize("n,t", [(1, 6), (2, 4), (3, 3), (4, 2)])
    @pytest.mark.parametrize("alpha", [0.0, 0.3, 1.0])
    def test_mean_is_exactly_mu(self, n, t, alpha):
        p = params(n=n, a=2, b=1, alpha=alpha)
        m = exact_enumeration_moments(p, t)
        assert m.mean == Fraction(2, 3)

    def test_single_urn_dispersion_is_zero(self):
        m = exact_enumeration_moments(params(n=1, alpha=0.4), 8)
        assert m.x == 0

    @pytest.mark.parametrize("alpha", [0.0, 0.3, 0.5, 0.8, 1.0])
    def test_recursion_matches_enumeration_exactly(self, alpha):
        p = params(n=2, a=1, b=2, alpha=alpha)
        rec = exact_moment_sequence(p, 6)
        for t in (1, 3, 6):
            oracle = exact_enumeration_moments(p, t)
            assert rec[t].v == oracle.v
            assert rec[t].x == oracle.x

    def test_float_recursion_matches_enumeration(self):
        p = params(n=3, a=2, b=2, alpha=0.8)
        seqs = finite_moment_sequences(p, 6)
        for t in (1, 4, 6):
            oracle = exact_enumeration_moments(p, t)
            assert seqs.v[t] == pytest.approx(float(oracle.v), rel=1e-12)
            assert seqs.x[t] == pytest.approx(float(oracle.x), rel=1e-12)

    def test_budget_guard(self):
        with pytest.raises(ValueError, match="instance too large"):
            exact_enumeration_moments(params(n=5), 5)


class TestCoefficients:
    def test_alpha_one_values(self):
        # alpha=1: A=2, B=1, f(0) = (1 - 1/(m+1))^2 = 4/9 for m=2
        c = recursion_coefficients(params(alpha=1.0), t=0, ez2=0.25)
        assert c.a_coef == 2.0
        assert c.b_coef == 1.0
        assert c.f == pytest.approx(4 / 9, rel=1e-15)

    @pytest.mark.parametrize("alpha", [0.0, 0.25, 0.5, 0.75, 1.0])
    @pytest.mark.parametrize("n", [1, 2, 10])
    def test_f_in_unit_interval_and_increasing(self, alpha, n):
        p = params(n=n, a=1, b=2, alpha=alpha)
        seqs = finite_moment_sequences(p, 500)
        ez2 = seqs.mean_sq()
        previous = None
        for t in range(0, 500, 7):
            c = recursion_coefficients(p, t, ez2[t])
            assert 0.0 < c.f < 1.0
            assert -1.0 <= c.b_coef <= 1.0
            if previous is not None:
                assert c.f > previous
            previous = c.f

    def test_g_positive_and_bounded(self):
        p = params(n=4, a=2, b=3, alpha=0.3)
        seqs = finite_moment_sequences(p, 300)
        mu = p.mean_fraction
        for t in range(0, 300, 11):
            c = recursion_coefficients(p, t, seqs.mean_sq()[t])
            d = t + p.total_init + 1
            assert 0.0 < c.g <= mu / (d * d)

    def test_degenerate_g(self):
        p = params(n=4)
        c = recursion_coefficients(p, t=0, ez2=p.mean_fraction)
        assert c.g == 0.0

    def test_ez2_out_of_range(self):
        with pytest.raises(ValueError, match="outside"):
            recursion_coefficients(params(), t=0, ez2=0.9)


class TestClosedForm:
    def test_matches_recursion(self):
        p = params(n=2, a=1, b=1, alpha=0.5)
        seqs = finite_moment_sequences(p, 100)
        x = closed_form_x(p, 100, seqs.v)
        assert x[0] == 0.0
        np.testing.assert_allclose(x[1:], seqs.x[1:], rtol=1e-12)

    def test_no_coupling_dispersion_saturates(self):
        # alpha=0: the dispersion rises to a positive plateau instead of decaying
        p = params(n=2, a=1, b=1, alpha=0.0)
        seqs = finite_moment_sequences(p, 20_000)
        x = closed_form_x(p, 20_000, seqs.v)
        assert np.all(np.diff(x) > 0)
        assert abs(x[20_000] / x[10_000] - 1) < 1e-3
        assert x[20_000] > 0.01

    def test_horizon_guard(self):
        p = params()
        with pytest.raises(ValueError, match="shorter"):
            closed_form_x(p, 10, np.zeros(5))


class TestLimitConsistency:
    def test_finite_n_approaches_limit(self):
        p = ModelParams(n_urns=1_000_000, red_init=1, white_init=1, alpha=0.5)
        fin = finite_moment_sequences(p, 1000)
        lim = limit_moment_sequence(p, 1000)
        rel = np.abs(fin.x[1:] - lim[1:]) / lim[1:]
        assert rel.max() < 1e-5

    def test_dispersion_below_bernoulli_variance(self):
        for alpha in (0.0, 0.5, 1.0):
            for a, b in ((1, 1), (2, 3)):
                p = ModelParams(n_urns=1, red_init=a, white_init=b, alpha=alpha)
                x = limit_moment_sequence(p, 10_000)
                mu = p.mean_fraction
                assert x.max() <= mu - mu * mu
                assert x.min() >= 0.0

    def test_variance_bound_sweep(self):
        # Var(Z_bar_t) < (a/m^2)/N along the whole trajectory
        for n in (1, 2, 10):
            for alpha in (0.0, 0.5, 1.0):
                p = params(n=n, a=2, b=1, alpha=alpha)
                seqs = finite_moment_sequences(p, 5000)
                bound = p.red_init / (p.total_init**2 * n)
                assert seqs.v.max() < bound
                assert seqs.mean_sq().max() < p.mean_fraction
