"""Exact second-moment evolution of the interacting-urn system.

Two deterministic recursions are evolved jointly:

* ``v_t``  = Var(Z_bar_t), the variance of the mean red fraction, and
* ``x_t``  = E[(Z_i_t - Z_bar_t)^2], the mean-square dispersion of one urn
  around the population mean ("L2 synchronization distance").

They couple through E[Z_bar_t^2] = v_t + mu^2 and the per-urn second moment
(1/N) sum_i E[Z_i_t^2] = x_t + v_t + mu^2, where mu = red_init / total_init.
The large-N limit of the dispersion, ``x_inf_t``, obeys a closed scalar
recursion and drives the fluctuation variance schedule used by the clt module.

Everything here is sampling-free.  The recursions run either in float
arithmetic or, for cross-validation, in exact rational arithmetic; a
brute-force enumeration over all reachable urn configurations provides an
independent oracle for small systems.
"""

import itertools
from collections import Counter, defaultdict
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from numbers import Rational

import numpy as np

from .core import ModelParams

#: Largest n_urns * t the enumeration oracle accepts by default.
ENUMERATION_BUDGET = 24


@dataclass(frozen=True)
class MomentState:
    """Pair (v, x) of exact second moments at one time.

    Values are floats in normal use and `fractions.Fraction` in exact mode;
    the step functions preserve whichever arithmetic the state carries.
    """

    t: int
    v: object
    x: object

    def mean_sq_per_urn(self, params: ModelParams):
        """(1/N) sum_i E[Z_i^2] = x + v + mu^2."""
        mu = _mean_fraction_like(params, self.v)
        return self.x + self.v + mu * mu


@dataclass(frozen=True)
class LimitMomentState:
    """Large-N limit of the dispersion x at one time."""

    t: int
    x_inf: float


def _exact(value) -> bool:
    return isinstance(value, Rational)


def _mean_fraction_like(params: ModelParams, like):
    if _exact(like):
        return Fraction(params.red_init, params.total_init)
    return params.red_init / params.total_init


def _alpha_like(params: ModelParams, like):
    # Fraction(float) is the exact value of the double, so exact mode verifies
    # the identical alpha the float recursion uses.
    if _exact(like):
        return Fraction(params.alpha)
    return float(params.alpha)


def initial_moment_state(exact: bool = False) -> MomentState:
    zero = Fraction(0) if exact else 0.0
    return MomentState(t=0, v=zero, x=zero)


def finite_n_moment_step(params: ModelParams, s: MomentState) -> MomentState:
    """One exact step of the coupled (v, x) recursion for N urns."""
    n = params.n_urns
    alpha = _alpha_like(params, s.v)
    mu = _mean_fraction_like(params, s.v)
    d = s.t + params.total_init + 1
    d2 = d * d
    ez2 = s.v + mu * mu                  # E[Z_bar^2]
    per_urn_sq = s.x + ez2               # (1/N) sum_i E[Z_i^2]
    frac_others = (n - 1) / Fraction(n) if _exact(s.v) else (n - 1) / n

    v_next = (
        s.v
        + mu / (n * d2)
        - alpha * (2 - alpha) * ez2 / (n * d2)
        - (1 - alpha) ** 2 * per_urn_sq / (n * d2)
    )
    x_next = (
        s.x
        - 2 * alpha * s.x / d
        + (alpha * alpha - frac_others * (1 - alpha) ** 2) * s.x / d2
        + frac_others * (mu - ez2) / d2
    )
    return MomentState(t=s.t + 1, v=v_next, x=x_next)


def limit_moment_step(params: ModelParams, s: LimitMomentState) -> LimitMomentState:
    """One step of the large-N dispersion recursion."""
    alpha = params.alpha
    mu = params.red_init / params.total_init
    d = s.t + params.total_init + 1
    x = s.x_inf
    x_next = x - 2 * alpha * x / d + (2 * alpha - 1) * x / (d * d) + (mu - mu * mu) / (d * d)
    return LimitMomentState(t=s.t + 1, x_inf=x_next)


@dataclass
class MomentSequences:
    """Finite-N moment trajectories v_0..T and x_0..T."""

    params: ModelParams
    v: np.ndarray
    x: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.v))

    def mean_sq(self) -> np.ndarray:
        """E[Z_bar_t^2] at every time."""
        mu = self.params.mean_fraction
        return self.v + mu * mu


def finite_moment_sequences(params: ModelParams, horizon: int) -> MomentSequences:
    """Evolve (v, x) for ``horizon`` steps and return the full trajectories."""
    n = params.n_urns
    alpha = params.alpha
    mu = params.red_init / params.total_init
    mu2 = mu * mu
    frac_others = (n - 1) / n
    c1 = alpha * (2 - alpha)
    c2 = (1 - alpha) ** 2
    bcoef = alpha * alpha - frac_others * c2

    v_seq = np.empty(horizon + 1)
    x_seq = np.empty(horizon + 1)
    v = 0.0
    x = 0.0
    v_seq[0] = x_seq[0] = 0.0
    base = params.total_init + 1
    for t in range(horizon):
        d = t + base
        d2 = d * d
        ez2 = v + mu2
        v = v + (mu - c1 * ez2 - c2 * (x + ez2)) / (n * d2)
        x = x - 2 * alpha * x / d + bcoef * x / d2 + frac_others * (mu - ez2) / d2
        v_seq[t + 1] = v
        x_seq[t + 1] = x
    return MomentSequences(params=params, v=v_seq, x=x_seq)


def exact_moment_sequence(params: ModelParams, horizon: int) -> list[MomentState]:
    """The finite-N recursion evolved in exact rational arithmetic."""
    states = [initial_moment_state(exact=True)]
    for _ in range(horizon):
        states.append(finite_n_moment_step(params, states[-1]))
    return states


def limit_moment_sequence(params: ModelParams, horizon: int) -> np.ndarray:
    """x_inf_0..horizon via the product-form solution, fully vectorised.

    The one-step map is affine, x' = f(t) x + g(t), so
    x_t = P_t * sum_{i<t} g(i) / P_{i+1} with P_t = prod_{k<t} f(k).
    Accumulation runs in extended precision because g spans many orders of
    magnitude over long horizons.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    alpha = params.alpha
    mu = params.red_init / params.total_init
    c = mu - mu * mu
    d = np.arange(horizon, dtype=np.longdouble) + params.total_init + 1
    f = 1.0 - 2.0 * alpha / d + (2.0 * alpha - 1.0) / (d * d)
    g = c / (d * d)

    x = np.empty(horizon + 1, dtype=np.longdouble)
    x[0] = 0.0
    if horizon:
        prod = np.cumprod(f)                    # P_{t+1} for t = 0..horizon-1
        x[1:] = prod * np.cumsum(g / prod)
    return x.astype(np.float64)


@dataclass(frozen=True)
class RecursionCoefficients:
    """Affine coefficients of the one-step dispersion map x' = f x + g."""

    a_coef: float          # 2 * alpha
    b_coef: float          # alpha^2 - ((N-1)/N) (1-alpha)^2
    f: float               # 1 - A/(t+m+1) + B/(t+m+1)^2
    g: float               # ((N-1)/N) (mu - E[Z_bar^2]) / (t+m+1)^2


def recursion_coefficients(params: ModelParams, t: int, ez2: float) -> RecursionCoefficients:
    """Coefficients at time t given the current second moment E[Z_bar_t^2]."""
    mu = params.red_init / params.total_init
    if not 0.0 <= ez2 <= mu:
        raise ValueError(f"E[Z^2]={ez2} outside [0, {mu}]")
    alpha = params.alpha
    n = params.n_urns
    d = t + params.total_init + 1
    a_coef = 2.0 * alpha
    b_coef = alpha * alpha - (n - 1) / n * (1.0 - alpha) ** 2
    f = 1.0 - a_coef / d + b_coef / (d * d)
    g = (n - 1) / n * (mu - ez2) / (d * d)
    return RecursionCoefficients(a_coef=a_coef, b_coef=b_coef, f=f, g=g)


def closed_form_x(params: ModelParams, horizon: int, v_sequence: np.ndarray) -> np.ndarray:
    """Dispersion x_0..horizon from the product-form solution.

    ``v_sequence`` must supply Var(Z_bar_t) for t < horizon so the driving
    term g(t) can be formed; the result must agree with iterating the
    recursion directly (this is the algebraic cross-check, not a new model).
    """
    if len(v_sequence) < horizon:
        raise ValueError("v_sequence shorter than horizon")
    mu = params.red_init / params.total_init
    alpha = params.alpha
    n = params.n_urns
    d = np.arange(horizon, dtype=np.longdouble) + params.total_init + 1
    b_coef = alpha * alpha - (n - 1) / n * (1.0 - alpha) ** 2
    f = 1.0 - 2.0 * alpha / d + b_coef / (d * d)
    ez2 = np.asarray(v_sequence[:horizon], dtype=np.longdouble) + np.longdouble(mu) ** 2
    g = (n - 1) / n * (mu - ez2) / (d * d)

    x = np.empty(horizon + 1, dtype=np.longdouble)
    x[0] = 0.0
    if horizon:
        prod = np.cumprod(f)
        x[1:] = prod * np.cumsum(g / prod)
    return x.astype(np.float64)


@dataclass(frozen=True)
class ExactMoments:
    """Exact rational moments from brute-force enumeration."""

    t: int
    mean: Fraction        # E[Z_bar]
    mean_sq: Fraction     # E[Z_bar^2]
    v: Fraction           # Var(Z_bar)
    x: Fraction           # E[(Z_i - Z_bar)^2]


def _enumerate_distribution(params: ModelParams, horizon: int) -> dict:
    """Exact law of the sorted red-count vector after ``horizon`` steps.

    Urns with equal counts are exchangeable, so states collapse to sorted
    tuples and transitions aggregate binomially within each group of equal
    urns.  All probabilities are exact rationals.
    """
    alpha = Fraction(params.alpha)
    n = params.n_urns
    dist = {(params.red_init,) * n: Fraction(1)}
    for t in range(horizon):
        total = t + params.total_init
        nxt = defaultdict(Fraction)
        for counts, p in dist.items():
            zbar = Fraction(sum(counts), n * total)
            groups = sorted(Counter(counts).items())
            probs = [alpha * zbar + (1 - alpha) * Fraction(c, total) for c, _ in groups]
            for ks in itertools.product(*(range(sz + 1) for _, sz in groups)):
                w = p
                new_counts = []
                for (c, sz), k, pr in zip(groups, ks, probs):
                    w *= comb(sz, k) * pr**k * (1 - pr) ** (sz - k)
                    new_counts.extend([c + 1] * k + [c] * (sz - k))
                if w:
                    nxt[tuple(sorted(new_counts))] += w
        dist = dict(nxt)
    return dist


def exact_enumeration_moments(
    params: ModelParams, t: int, budget: int = ENUMERATION_BUDGET
) -> ExactMoments:
    """Moments at time t by exhaustive enumeration, exact in the rationals.

    Independent of the recursions: it evolves the full configuration law and
    reads the moments off directly.  Refuses instances with n_urns * t beyond
    ``budget`` (state spaces grow quickly past that).
    """
    if params.n_urns * t > budget:
        raise ValueError(
            f"instance too large: n_urns * t = {params.n_urns * t} exceeds budget {budget}"
        )
    dist = _enumerate_distribution(params, t)
    n = params.n_urns
    total = t + params.total_init

    mean = Fraction(0)
    mean_sq = Fraction(0)
    per_urn_sq = Fraction(0)
    for counts, p in dist.items():
        s = Fraction(sum(counts), n * total)
        mean += p * s
        mean_sq += p * s * s
        per_urn_sq += p * sum(Fraction(c, total) ** 2 for c in counts) / n
    return ExactMoments(
        t=t,
        mean=mean,
        mean_sq=mean_sq,
        v=mean_sq - mean * mean,
        x=per_urn_sq - mean_sq,
    )
