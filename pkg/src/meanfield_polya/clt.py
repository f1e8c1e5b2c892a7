"""Fluctuation limit of the mean fraction for many urns.

As the number of urns N grows, the rescaled fluctuation
W_t = sqrt(N) * (Z_bar_t - mu) converges to a Gaussian process with
independent increments, W_{t+1} = W_t + sigma_t * B_{t+1}, started at 0.
The per-step variance schedule is

    sigma_t^2 = ((mu - mu^2) - (1 - alpha)^2 * x_inf_t) / (t + m + 1)^2,

driven by the large-N dispersion recursion.  This module computes the
schedule, samples the limit process reproducibly, and runs quantitative
moment/normality/correlation checks of finite-N ensembles against it.
"""

import math
from dataclasses import dataclass

import numpy as np

from .core import ModelParams, SystemState, init_system, step
from .moments import finite_moment_sequences, limit_moment_sequence
from .montecarlo import EnsembleSpec, StreamingStats, run_replicas
from .rng import DYNAMICS_STREAM, GAUSSIAN_STREAM, UniformSource


@dataclass(frozen=True)
class SigmaSchedule:
    """Increment variances sigma_t^2 of the limit process, t = 0..horizon-1."""

    params: ModelParams
    sigma_sq: np.ndarray

    @property
    def horizon(self) -> int:
        return len(self.sigma_sq)

    def cumulative(self) -> np.ndarray:
        """Var(W_t) = sum_{s<t} sigma_s^2 for t = 0..horizon."""
        out = np.empty(self.horizon + 1)
        out[0] = 0.0
        np.cumsum(self.sigma_sq, out=out[1:])
        return out


def sigma_schedule(params: ModelParams, horizon: int) -> SigmaSchedule:
    """Variance schedule for t = 0..horizon-1.

    Non-negativity is guaranteed in exact arithmetic (the dispersion never
    exceeds mu - mu^2); anything below -1e-15 therefore signals a recursion
    bug and raises.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    mu = params.mean_fraction
    c = mu - mu * mu
    x_inf = limit_moment_sequence(params, horizon - 1)
    d = np.arange(horizon) + params.total_init + 1
    sig2 = (c - (1.0 - params.alpha) ** 2 * x_inf) / (d * d)
    if sig2.min() < -1e-15:
        raise FloatingPointError(
            f"negative increment variance {sig2.min()} at t={int(sig2.argmin())}"
        )
    return SigmaSchedule(params=params, sigma_sq=np.maximum(sig2, 0.0))


@dataclass(frozen=True)
class LimitPath:
    """One sampled path of the limit process, W_0..W_horizon."""

    w: np.ndarray


def sample_limit_paths(schedule: SigmaSchedule, source: UniformSource, n_paths: int) -> np.ndarray:
    """Sample ``n_paths`` limit-process paths; returns (n_paths, horizon+1).

    Path r draws its step-t normal at address (t, position r) of the Gaussian
    stream, so any sub-batch reproduces the same paths.
    """
    gauss = source.with_stream(GAUSSIAN_STREAM)
    horizon = schedule.horizon
    sigma = np.sqrt(schedule.sigma_sq)
    w = np.empty((n_paths, horizon + 1))
    w[:, 0] = 0.0
    for t in range(horizon):
        w[:, t + 1] = w[:, t] + sigma[t] * gauss.normal_block(t, 0, n_paths)
    return w


def sample_limit_process(schedule: SigmaSchedule, source: UniformSource, replica: int) -> LimitPath:
    """Sample the single path owned by ``replica``."""
    gauss = source.with_stream(GAUSSIAN_STREAM)
    sigma = np.sqrt(schedule.sigma_sq)
    w = np.empty(schedule.horizon + 1)
    w[0] = 0.0
    for t in range(schedule.horizon):
        w[t + 1] = w[t] + sigma[t] * gauss.normal_block(t, replica, 1)[0]
    return LimitPath(w=w)


def empirical_w(params: ModelParams, state: SystemState) -> float:
    """Rescaled fluctuation sqrt(N) * (Z_bar - mu) of a finite system."""
    return math.sqrt(params.n_urns) * (state.mean_fraction(params) - params.mean_fraction)


@dataclass(frozen=True)
class CltThresholds:
    """Acceptance bands for the ensemble moment checks."""

    sigma_level: float = 4.0
    max_abs_skewness: float = 0.15
    max_excess_kurtosis: float = 0.30


@dataclass(frozen=True)
class CltRow:
    """Moment comparison for one time step."""

    t: int
    w_mean: float
    w_var: float
    w_var_se: float
    ref_var_finite: float   # N * v_t from the exact finite-N recursion
    ref_var_limit: float    # sum_{s<t} sigma_s^2
    skewness: float
    excess_kurtosis: float
    var_ok: bool
    skew_ok: bool
    kurt_ok: bool

    @property
    def all_ok(self) -> bool:
        return self.var_ok and self.skew_ok and self.kurt_ok


@dataclass
class CltReport:
    """Per-time moment checks plus the increment-correlation summary."""

    params: ModelParams
    replicas: int
    horizon: int
    seed: int
    thresholds: CltThresholds
    rows: list
    max_abs_increment_corr: float
    corr_threshold: float

    @property
    def corr_ok(self) -> bool:
        return self.max_abs_increment_corr <= self.corr_threshold

    @property
    def gaussian_ok(self) -> bool:
        """Normality flags only (skewness/kurtosis at every t >= 1)."""
        return all(r.skew_ok and r.kurt_ok for r in self.rows if r.t >= 1)

    @property
    def all_ok(self) -> bool:
        return self.corr_ok and all(r.all_ok for r in self.rows if r.t >= 1)

    def records(self):
        for r in self.rows:
            yield {
                "t": r.t,
                "w_mean": r.w_mean,
                "w_var": r.w_var,
                "w_var_se": r.w_var_se,
                "ref_var_finite": r.ref_var_finite,
                "ref_var_limit": r.ref_var_limit,
                "skewness": r.skewness,
                "excess_kurtosis": r.excess_kurtosis,
                "var_ok": r.var_ok,
                "skew_ok": r.skew_ok,
                "kurt_ok": r.kurt_ok,
            }


def clt_moment_test(
    params: ModelParams,
    replicas: int,
    horizon: int,
    seed: int,
    thresholds: CltThresholds = CltThresholds(),
    allow_undersized: bool = False,
    threads: int = 1,
    budget_override: bool = False,
) -> CltReport:
    """Quantitative finite-N check of the Gaussian fluctuation limit.

    Runs ``replicas`` independent systems and, at every t <= horizon, compares
    Var(W_t) against N * v_t from the exact finite-N recursion (a sharp,
    sampling-free reference) and records skewness/excess-kurtosis flags and
    the cross-correlations of increments, which vanish for a process with
    independent Gaussian steps.
    """
    if not allow_undersized and (replicas < 500 or params.n_urns < 500):
        raise ValueError(
            "clt_moment_test needs replicas >= 500 and n_urns >= 500; "
            "pass allow_undersized=True to run a deliberately small case"
        )
    spec = EnsembleSpec(
        params=params,
        replicas=replicas,
        horizon=horizon,
        seed=seed,
        record_times=tuple(range(horizon + 1)),
        collect=("z_bar",),
        budget_override=budget_override,
    )
    est = run_replicas(spec, threads=threads)
    w_stats = est.w_stats()

    v_exact = finite_moment_sequences(params, horizon).v
    limit_var = sigma_schedule(params, horizon).cumulative()
    n = params.n_urns

    rows = []
    for k, t in enumerate(est.times):
        s: StreamingStats = w_stats[k]
        ref = n * v_exact[t]
        if t == 0:
            rows.append(
                CltRow(
                    t=0, w_mean=s.mean, w_var=0.0, w_var_se=0.0,
                    ref_var_finite=0.0, ref_var_limit=0.0,
                    skewness=math.nan, excess_kurtosis=math.nan,
                    var_ok=True, skew_ok=True, kurt_ok=True,
                )
            )
            continue
        var_ok = abs(s.variance - ref) <= thresholds.sigma_level * s.se_variance
        rows.append(
            CltRow(
                t=int(t),
                w_mean=s.mean,
                w_var=s.variance,
                w_var_se=s.se_variance,
                ref_var_finite=float(ref),
                ref_var_limit=float(limit_var[t]),
                skewness=s.skewness,
                excess_kurtosis=s.excess_kurtosis,
                var_ok=bool(var_ok),
                skew_ok=bool(abs(s.skewness) <= thresholds.max_abs_skewness),
                kurt_ok=bool(abs(s.excess_kurtosis) <= thresholds.max_excess_kurtosis),
            )
        )

    # increment correlations from the collected per-replica means
    root_n = math.sqrt(n)
    w_paths = root_n * (est.samples["z_bar"].T - params.mean_fraction)  # (R, T+1)
    increments = np.diff(w_paths, axis=1)
    corr = np.corrcoef(increments.T)
    off = corr[~np.eye(corr.shape[0], dtype=bool)]
    max_corr = float(np.abs(off).max()) if off.size else 0.0

    return CltReport(
        params=params,
        replicas=replicas,
        horizon=horizon,
        seed=seed,
        thresholds=thresholds,
        rows=rows,
        max_abs_increment_corr=max_corr,
        corr_threshold=thresholds.sigma_level / math.sqrt(replicas),
    )


@dataclass(frozen=True)
class LlnCheck:
    """Single-replica deviations from the large-N limits at one time."""

    n_urns: int
    t: int
    z_bar_dev: float      # |Z_bar_t - mu|
    mean_sq_dev: float    # |(1/N) sum Z_i^2 - (x_inf_t + mu^2)|


def lln_check(params: ModelParams, t: int, seed: int, replica: int = 0,
              allow_undersized: bool = False) -> LlnCheck:
    """Compare one large-N replica against the deterministic limits.

    At every fixed t, Z_bar tends to mu and the mean squared fraction tends
    to x_inf_t + mu^2 as N grows; this evaluates both gaps for a single
    simulated system.
    """
    if not allow_undersized and params.n_urns < 10_000:
        raise ValueError("lln_check expects n_urns >= 10000 (or allow_undersized=True)")
    source = UniformSource(seed, DYNAMICS_STREAM)
    state = init_system(params)
    for s in range(t):
        u = source.step_uniforms(s, params.n_urns, replica, replica + 1)[0]
        state = step(state, params, u)
    z = state.fractions(params)
    mu = params.mean_fraction
    x_inf = limit_moment_sequence(params, t)[t]
    return LlnCheck(
        n_urns=params.n_urns,
        t=t,
        z_bar_dev=abs(float(z.mean()) - mu),
        mean_sq_dev=abs(float((z * z).mean()) - (x_inf + mu * mu)),
    )
