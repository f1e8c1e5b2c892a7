"""Synchronization-rate analysis of the dispersion decay.

The coupling strength splits the long-run decay of the dispersion
x_t = E[(Z_i - Z_bar)^2] into three regimes:

* subcritical  (alpha < 1/2): x_t decays like t^(-2 alpha),
* critical     (alpha = 1/2): x_t decays like log(t) / t,
* supercritical(alpha > 1/2): x_t decays like 1 / t.

Rates are extracted from the deterministic recursions (they evaluate exact
expectations, so no sampling noise enters the fits).  The quasi-martingale
diagnostic checks the summability that underlies almost-sure synchronization:
the series sum_t alpha * sqrt(x_t) / (t + m + 1) must have vanishing tails.
"""

from dataclasses import dataclass

import numpy as np

from .core import ModelParams

#: absolute tolerance for detecting the critical coupling alpha = 1/2
CRITICAL_ALPHA_TOL = 1e-12

SUBCRITICAL = "subcritical"
CRITICAL = "critical"
SUPERCRITICAL = "supercritical"


@dataclass(frozen=True)
class Regime:
    label: str
    predicted_rate: str
    predicted_slope: float | None

    def __str__(self):
        return f"{self.label} ({self.predicted_rate})"


def classify_regime(alpha: float) -> Regime:
    """Regime of the dispersion decay for a coupling strength."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0,1]")
    if abs(alpha - 0.5) <= CRITICAL_ALPHA_TOL:
        return Regime(CRITICAL, "t^(-1)*log(t)", None)
    if alpha < 0.5:
        return Regime(SUBCRITICAL, f"t^(-{2 * alpha:g})", -2.0 * alpha)
    return Regime(SUPERCRITICAL, "t^(-1)", -1.0)


@dataclass(frozen=True)
class ExponentFit:
    """Least-squares line on log-log axes over a time window."""

    slope: float
    intercept: float
    r_squared: float
    window: tuple[float, float]
    n_points: int


def log_spaced_subsample(times: np.ndarray, per_decade: int = 50) -> np.ndarray:
    """Indices of ~per_decade points per decade of t, deduplicated.

    Keeps least-squares fits from being dominated by the dense early part of
    an integer-time series.
    """
    times = np.asarray(times, dtype=float)
    positive = times > 0
    if not positive.any():
        return np.array([], dtype=np.int64)
    lo = np.log10(times[positive].min())
    hi = np.log10(times[positive].max())
    n = max(int((hi - lo) * per_decade) + 1, 2)
    targets = np.logspace(lo, hi, n)
    idx = np.searchsorted(times, targets)
    idx = np.clip(idx, 0, len(times) - 1)
    return np.unique(idx[positive[idx]])


def fit_power_law(
    times: np.ndarray,
    values: np.ndarray,
    window: tuple[float, float],
    per_decade: int = 50,
) -> ExponentFit:
    """Fit value ~ C * t^slope by ordinary least squares on log-log axes.

    Points are restricted to the window and log-subsampled before fitting.
    All values in the window must be positive.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    lo, hi = window
    mask = (times >= lo) & (times <= hi) & (times > 0)
    if mask.sum() < 10:
        raise ValueError("window must contain at least 10 points")
    t_win = times[mask]
    v_win = values[mask]
    if np.any(v_win <= 0):
        raise ValueError("power-law fit requires positive values")

    keep = log_spaced_subsample(t_win, per_decade)
    lt = np.log(t_win[keep])
    lv = np.log(v_win[keep])
    slope, intercept = np.polyfit(lt, lv, 1)
    resid = lv - (slope * lt + intercept)
    ss_tot = float(((lv - lv.mean()) ** 2).sum())
    r_squared = 1.0 - float((resid**2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return ExponentFit(
        slope=float(slope),
        intercept=float(intercept),
        r_squared=r_squared,
        window=(float(lo), float(hi)),
        n_points=int(keep.size),
    )


@dataclass(frozen=True)
class CriticalDiagnostic:
    """Per-decade means of t * x_t / log(t) and the boundedness verdict."""

    decade_edges: np.ndarray
    decade_means: np.ndarray
    last_relative_change: float
    bounded: bool


def critical_diagnostic(
    times: np.ndarray, values: np.ndarray, bounded_tol: float = 0.10
) -> CriticalDiagnostic:
    """Check whether t * x_t / log(t) stabilises across decades.

    In the critical regime the ratio approaches a constant, so the means of
    the last two decades agree within ``bounded_tol``; away from it the ratio
    drifts monotonically.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    mask = times >= 2  # log(t) must be safely positive
    t = times[mask]
    x = values[mask]
    if t.size == 0 or np.log10(t.max() / t.min()) < 3:
        raise ValueError("series must span at least 3 decades of t")

    ratio = t * x / np.log(t)
    k_lo = int(np.floor(np.log10(t.min())))
    k_hi = int(np.ceil(np.log10(t.max())))
    edges = 10.0 ** np.arange(k_lo, k_hi + 1)
    means = []
    kept_edges = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (t >= lo) & (t < hi)
        if sel.sum() >= 3:
            means.append(float(ratio[sel].mean()))
            kept_edges.append(lo)
    kept_edges.append(edges[-1])
    means = np.asarray(means)
    if means.size < 2:
        raise ValueError("series must cover at least two full decades")
    change = abs(means[-1] - means[-2]) / abs(means[-2])
    return CriticalDiagnostic(
        decade_edges=np.asarray(kept_edges),
        decade_means=means,
        last_relative_change=float(change),
        bounded=bool(change <= bounded_tol),
    )


@dataclass(frozen=True)
class QuasiMartingaleReport:
    """Partial sums of the drift bound alpha * sqrt(x_t) / (t + m + 1)."""

    times: np.ndarray
    partial_sums: np.ndarray
    total: float
    tail_increment: float       # sum over the last decade (T/10, T]
    tail_fraction: float        # tail_increment / total


def quasi_martingale_sum(params: ModelParams, x_sequence: np.ndarray) -> QuasiMartingaleReport:
    """Accumulate the expected-drift bound along a dispersion sequence.

    For alpha = 0 every term vanishes (each urn's fraction is already a
    martingale); for alpha > 0 summability of the terms is what upgrades
    L2 synchronization to almost-sure synchronization.
    """
    x = np.asarray(x_sequence, dtype=float)
    t = np.arange(len(x))
    terms = params.alpha * np.sqrt(np.maximum(x, 0.0)) / (t + params.total_init + 1)
    sums = np.cumsum(terms)
    total = float(sums[-1])
    horizon = len(x) - 1
    cut = horizon // 10
    tail = float(sums[-1] - sums[cut]) if horizon >= 10 else total
    return QuasiMartingaleReport(
        times=t,
        partial_sums=sums,
        total=total,
        tail_increment=tail,
        tail_fraction=tail / total if total > 0 else 0.0,
    )
