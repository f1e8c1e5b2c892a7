"""Urn dynamics: constructors, single steps, trajectories, process invariants."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meanfield_polya import (
    EnsembleSpec,
    ModelParams,
    SystemState,
    UniformSource,
    init_system,
    reinforcement_probability,
    run_replicas,
    run_trajectory,
    step,
)
from meanfield_polya.moments import _enumerate_distribution


def params(n=2, a=1, b=1, alpha=0.5):
    return ModelParams(n_urns=n, red_init=a, white_init=b, alpha=alpha)


class TestConstruction:
    def test_initial_state(self):
        p = params(n=2, a=1, b=1, alpha=0.5)
        s = init_system(p)
        assert s.t == 0
        np.testing.assert_array_equal(s.red_counts, [1, 1])
        np.testing.assert_allclose(s.fractions(p), [0.5, 0.5])

    def test_initial_fraction_is_mu(self):
        p = params(n=3, a=2, b=3, alpha=0.0)
        s = init_system(p)
        np.testing.assert_allclose(s.fractions(p), 2 / 5)

    @pytest.mark.parametrize(
        "kwargs,msg",
        [
            (dict(n=1, a=0, b=1, alpha=0.2), "red_init must be >= 1"),
            (dict(n=1, a=1, b=0, alpha=0.2), "white_init must be >= 1"),
            (dict(n=0, a=1, b=1, alpha=0.2), "n_urns must be >= 1"),
            (dict(n=1, a=1, b=1, alpha=1.5), "alpha must lie in [0,1]"),
            (dict(n=1, a=1, b=1, alpha=-0.1), "alpha must lie in [0,1]"),
        ],
    )
    def test_validation(self, kwargs, msg):
        with pytest.raises(ValueError, match=msg.replace("[", "\\[")):
            params(**kwargs)

    def test_total_init(self):
        assert params(a=2, b=3).total_init == 5


class TestReinforcementProbability:
    def test_alpha_zero_is_own_fraction(self):
        p = params(n=2, alpha=0.0)
        s = SystemState(t=2, red_counts=np.array([3, 1]))
        assert reinforcement_probability(s, p, 0) == 3 / 4
        assert reinforcement_probability(s, p, 1) == 1 / 4

    def test_single_urn_ignores_alpha(self):
        s = SystemState(t=3, red_counts=np.array([2]))
        for alpha in (0.0, 0.3, 1.0):
            p = params(n=1, alpha=alpha)
            assert reinforcement_probability(s, p, 0) == pytest.approx(2 / 5, rel=1e-15)

    def test_convex_combination(self):
        # fractions (1/3, 2/3), alpha=1/2, urn 0 -> 1/2*1/2 + 1/2*1/3 = 5/12
        p = params(n=2, a=1, b=2, alpha=0.5)
        s = SystemState(t=0, red_counts=np.array([1, 2]))
        assert reinforcement_probability(s, p, 0) == pytest.approx(5 / 12, rel=1e-15)

    def test_alpha_one_shares_threshold(self):
        p = params(n=3, alpha=1.0)
        s = SystemState(t=4, red_counts=np.array([1, 3, 5]))
        probs = [reinforcement_probability(s, p, i) for i in range(3)]
        assert probs[0] == probs[1] == probs[2]

    def test_index_out_of_range(self):
        p = params(n=2)
        s = init_system(p)
        with pytest.raises(IndexError):
            reinforcement_probability(s, p, 2)


class TestStep:
    def test_threshold_example(self):
        p = params(n=2, a=1, b=1, alpha=0.3)
        s = init_system(p)
        s1 = step(s, p, np.array([0.3, 0.9]))
        assert s1.t == 1
        np.testing.assert_array_equal(s1.red_counts, [2, 1])
        np.testing.assert_allclose(s1.fractions(p), [2 / 3, 1 / 3])

    def test_threshold_is_inclusive(self):
        # all fractions equal 1/2, so every urn's probability is exactly 0.5
        p = params(n=2, a=1, b=1, alpha=0.7)
        s1 = step(init_system(p), p, np.array([0.5, 0.5]))
        np.testing.assert_array_equal(s1.red_counts, [2, 2])

    def test_length_mismatch(self):
        p = params(n=2)
        with pytest.raises(ValueError, match="expected 2 uniforms"):
            step(init_system(p), p, np.array([0.1]))

    @given(
        n=st.integers(1, 5),
        a=st.integers(1, 3),
        b=st.integers(1, 3),
        alpha=st.floats(0, 1),
        data=st.data(),
    )
    @settings(max_examples=60, deadline=None)
    def test_step_invariants(self, n, a, b, alpha, data):
        p = ModelParams(n_urns=n, red_init=a, white_init=b, alpha=alpha)
        state = init_system(p)
        for _ in range(3):
            u = np.array(data.draw(st.lists(
                st.floats(0, 1, exclude_max=True), min_size=n, max_size=n)))
            nxt = step(state, p, u)
            growth = nxt.red_counts - state.red_counts
            assert set(np.unique(growth)) <= {0, 1}
            # ball conservation: t + m balls per urn, red within [a, a+t]
            assert nxt.total_balls(p) == nxt.t + p.total_init
            assert (nxt.red_counts >= a).all()
            assert (nxt.red_counts <= a + nxt.t).all()
            z = nxt.fractions(p)
            assert ((z > 0) & (z < 1)).all()
            zbar = nxt.mean_fraction(p)
            assert z.min() <= zbar <= z.max()
            state = nxt


class TestTrajectory:
    def test_deterministic_replay(self):
        p = params(n=3, alpha=0.4)
        r1 = run_trajectory(p, 200, UniformSource(42), replica=1, record_every=10)
        r2 = run_trajectory(p, 200, UniformSource(42), replica=1, record_every=10)
        np.testing.assert_array_equal(r1.z_bar, r2.z_bar)
        np.testing.assert_array_equal(r1.spread, r2.spread)

    def test_replicas_differ(self):
        p = params(n=3, alpha=0.4)
        r1 = run_trajectory(p, 50, UniformSource(42), replica=0)
        r2 = run_trajectory(p, 50, UniformSource(42), replica=1)
        assert not np.array_equal(r1.z_bar, r2.z_bar)

    def test_single_urn_support_lattice(self):
        # classical single urn: Z_T lives on {k/(T+2) : k=1..T+1}
        p = params(n=1, a=1, b=1, alpha=0.9)
        horizon = 400
        for rep in range(5):
            rec = run_trajectory(p, horizon, UniformSource(7), replica=rep,
                                 record_times=[horizon])
            k = rec.z_bar[0] * (horizon + 2)
            assert abs(k - round(k)) < 1e-9
            assert 1 <= round(k) <= horizon + 1

    def test_single_urn_support_matches_enumeration(self):
        # exhaustive small-horizon check of the same lattice
        p = params(n=1, a=1, b=1, alpha=0.0)
        dist = _enumerate_distribution(p, 6)
        reachable = sorted(counts[0] for counts in dist)
        assert reachable == list(range(1, 8))

    def test_full_state_recording(self):
        p = params(n=4, alpha=0.2)
        rec = run_trajectory(p, 30, UniformSource(3), record_times=[0, 15, 30],
                             keep_full_state=True)
        assert rec.z_full.shape == (3, 4)
        np.testing.assert_allclose(rec.z_full.mean(axis=1), rec.z_bar)
        rows = list(rec.full_state_rows())
        assert len(rows) == 12
        assert rows[0] == {"t": 0, "urn": 0, "z": 0.5}

    def test_mean_is_martingale_anchor(self):
        # ensemble mean of Z_bar at late time stays within 4 SE of mu
        p = params(n=5, a=1, b=1, alpha=0.5)
        spec = EnsembleSpec(params=p, replicas=200, horizon=1000, seed=99,
                            record_times=(1000,))
        est = run_replicas(spec)
        assert abs(est.z_mean[0] - 0.5) <= 4 * est.z_mean_se[0]


class TestProcessInvariants:
    """Statistical invariants of the dynamics, checked on small ensembles."""

    def test_mean_fraction_martingale_steps(self):
        p = params(n=4, a=1, b=2, alpha=0.6)
        spec = EnsembleSpec(params=p, replicas=4000, horizon=12, seed=17,
                            record_times=tuple(range(13)), collect=("z_bar",))
        zb = run_replicas(spec).samples["z_bar"]  # (13, R)
        inc = np.diff(zb, axis=0)
        for t in range(inc.shape[0]):
            se = inc[t].std(ddof=1) / np.sqrt(inc.shape[1])
            assert abs(inc[t].mean()) <= 4 * se

    def test_exchangeability_of_marginals(self):
        p = params(n=5, a=1, b=1, alpha=0.3)
        spec = EnsembleSpec(params=p, replicas=4000, horizon=20, seed=23,
                            record_times=(20,), collect=("z",))
        z = run_replicas(spec).samples["z"][0]  # (R, N)
        r = z.shape[0]
        pooled_mean = z.mean()
        pooled_sq = (z**2).mean()
        for i in range(p.n_urns):
            se = z[:, i].std(ddof=1) / np.sqrt(r)
            assert abs(z[:, i].mean() - pooled_mean) <= 4 * se
            sq = z[:, i] ** 2
            se_sq = sq.std(ddof=1) / np.sqrt(r)
            assert abs(sq.mean() - pooled_sq) <= 4 * se_sq

    @pytest.mark.parametrize("alpha", [0.0, 0.6])
    def test_per_urn_conditional_drift(self, alpha):
        # E[Z_{t+1}(i) - Z_t(i) | state] = alpha (Z_bar - Z_i) / (t+m+1);
        # zero for alpha = 0 (per-urn martingale), nonzero drift otherwise.
        p = params(n=4, a=1, b=1, alpha=alpha)
        t_check = 10
        spec = EnsembleSpec(params=p, replicas=6000, horizon=t_check + 1, seed=31,
                            record_times=(t_check, t_check + 1), collect=("z",))
        z = run_replicas(spec).samples["z"]  # (2, R, N)
        predicted = alpha * (z[0].mean(axis=1, keepdims=True) - z[0]) / (t_check + p.total_init + 1)
        resid = z[1] - z[0] - predicted
        flat = resid.ravel()
        se = flat.std(ddof=1) / np.sqrt(flat.size)
        assert abs(flat.mean()) <= 4 * se
        if alpha > 0:
            # the drift itself is detectably nonzero where Z_i is off-average
            mag = np.abs(predicted).mean()
            assert mag > 0
