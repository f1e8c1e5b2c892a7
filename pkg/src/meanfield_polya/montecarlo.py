"""Parallel replica ensembles with mergeable streaming statistics.

Replicas are simulated in fixed-size shards.  Each shard reduces its replicas
into streaming moment accumulators; shard results are then combined along a
fixed binary reduction tree, so the ensemble output is bit-identical no matter
how many worker threads execute the shards.  Raw per-replica samples of chosen
scalars can be collected alongside the summary statistics.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import ModelParams, resolve_record_times
from .rng import DYNAMICS_STREAM, UniformSource

DEFAULT_SHARD_SIZE = 256
#: refuse ensembles whose n_urns * replicas * horizon exceeds this many urn-steps
DEFAULT_BUDGET = 2_000_000_000


class BudgetError(RuntimeError):
    """Raised when an ensemble would exceed the configured work budget."""


@dataclass(frozen=True)
class StreamingStats:
    """Count, mean and central-moment sums (2nd..4th) of a scalar stream.

    Supports exact merging of disjoint streams.  The merge is written with
    swap-symmetric float expressions, so it is bitwise commutative; evaluated
    along a fixed reduction tree it is also deterministic.
    """

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0
    m3: float = 0.0
    m4: float = 0.0

    @classmethod
    def from_values(cls, values: np.ndarray) -> "StreamingStats":
        values = np.asarray(values, dtype=float)
        n = int(values.size)
        if n == 0:
            return cls()
        mean = float(values.mean())
        d = values - mean
        d2 = d * d
        return cls(
            count=n,
            mean=mean,
            m2=float(d2.sum()),
            m3=float((d2 * d).sum()),
            m4=float((d2 * d2).sum()),
        )

    @property
    def variance(self) -> float:
        """Unbiased sample variance."""
        if self.count < 2:
            return math.nan
        return self.m2 / (self.count - 1)

    @property
    def se_mean(self) -> float:
        if self.count < 2:
            return math.nan
        return math.sqrt(self.variance / self.count)

    @property
    def se_variance(self) -> float:
        """Standard error of the sample variance (4th-moment formula)."""
        n = self.count
        if n < 2:
            return math.nan
        c2 = self.m2 / n
        c4 = self.m4 / n
        return math.sqrt(max(c4 - c2 * c2 * (n - 3) / (n - 1), 0.0) / n)

    @property
    def skewness(self) -> float:
        if self.count < 2 or self.m2 <= 0:
            return math.nan
        return math.sqrt(self.count) * self.m3 / self.m2**1.5

    @property
    def excess_kurtosis(self) -> float:
        if self.count < 2 or self.m2 <= 0:
            return math.nan
        return self.count * self.m4 / (self.m2 * self.m2) - 3.0

    def scaled(self, factor: float, offset: float = 0.0) -> "StreamingStats":
        """Statistics of factor * value + offset."""
        f2 = factor * factor
        return StreamingStats(
            count=self.count,
            mean=factor * self.mean + offset,
            m2=f2 * self.m2,
            m3=f2 * factor * self.m3,
            m4=f2 * f2 * self.m4,
        )


def merge_stats(a: StreamingStats, b: StreamingStats) -> StreamingStats:
    """Statistics of the concatenated streams behind ``a`` and ``b``."""
    na, nb = a.count, b.count
    if na == 0:
        return b
    if nb == 0:
        return a
    n = na + nb
    delta = b.mean - a.mean
    d2 = delta * delta
    mean = (na * a.mean + nb * b.mean) / n
    m2 = a.m2 + b.m2 + d2 * (na * nb / n)
    m3 = (
        a.m3
        + b.m3
        + d2 * delta * (na * nb * (na - nb)) / (n * n)
        + 3.0 * delta * (na * b.m2 - nb * a.m2) / n
    )
    m4 = (
        a.m4
        + b.m4
        + d2 * d2 * (na * nb * (na * na - na * nb + nb * nb)) / (n * n * n)
        + 6.0 * d2 * (na * na * b.m2 + nb * nb * a.m2) / (n * n)
        + 4.0 * delta * (na * b.m3 - nb * a.m3) / n
    )
    return StreamingStats(count=n, mean=mean, m2=m2, m3=m3, m4=m4)


def merge_tree(shards: list[StreamingStats]) -> StreamingStats:
    """Reduce shard statistics pairwise in index order (fixed tree shape)."""
    if not shards:
        return StreamingStats()
    level = list(shards)
    while len(level) > 1:
        nxt = [
            merge_stats(level[k], level[k + 1]) if k + 1 < len(level) else level[k]
            for k in range(0, len(level), 2)
        ]
        level = nxt
    return level[0]


def ks_uniform(sample: np.ndarray) -> float:
    """One-sample Kolmogorov-Smirnov distance to Uniform[0, 1]."""
    u = np.sort(np.asarray(sample, dtype=float))
    n = u.size
    if n == 0:
        raise ValueError("empty sample")
    grid = np.arange(1, n + 1) / n
    return float(max((grid - u).max(), (u - (grid - 1.0 / n)).max()))


#: estimator names exposed per recorded time
ESTIMATORS = ("z_mean", "v_hat", "x_hat", "abs_dev", "spread_mean", "w_var")
#: raw per-replica values that can be collected ("z" is the full fraction matrix)
COLLECTABLE = ("z_bar", "spread", "disp_sq", "z")


@dataclass(frozen=True)
class EnsembleSpec:
    """Everything that determines an ensemble run (and hence its output)."""

    params: ModelParams
    replicas: int
    horizon: int
    seed: int
    record_times: tuple = ()
    estimators: tuple = ESTIMATORS
    collect: tuple = ()
    shard_size: int = DEFAULT_SHARD_SIZE
    budget: int = DEFAULT_BUDGET
    budget_override: bool = False

    def __post_init__(self):
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        unknown = set(self.collect) - set(COLLECTABLE)
        if unknown:
            raise ValueError(f"unknown collectables: {sorted(unknown)}")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown:
            raise ValueError(f"unknown estimators: {sorted(unknown)}")
        work = self.params.n_urns * self.replicas * self.horizon
        if work > self.budget and not self.budget_override:
            raise BudgetError(
                f"ensemble needs {work:.3g} urn-steps, over the budget of "
                f"{self.budget:.3g}; pass budget_override to run anyway"
            )

    def resolved_times(self) -> np.ndarray:
        times = self.record_times if len(self.record_times) else None
        return resolve_record_times(self.horizon, times)


@dataclass
class EnsembleEstimates:
    """Merged ensemble statistics at each recorded time.

    ``stats`` maps accumulator name -> list of StreamingStats (one per
    recorded time); the named properties expose the derived estimates.
    x_hat pools the squared dispersion over urns and replicas; its standard
    error comes from the across-replica spread of per-replica means, which is
    the correct clustering for urns that are dependent within a replica.
    """

    spec: EnsembleSpec
    times: np.ndarray
    stats: dict
    samples: dict = field(default_factory=dict)

    def _arr(self, name, attr):
        return np.array([getattr(s, attr) for s in self.stats[name]])

    @property
    def replicas(self) -> int:
        return self.spec.replicas

    @property
    def se_defined(self) -> bool:
        return self.spec.replicas >= 2

    # mean fraction across replicas
    @property
    def z_mean(self):
        return self._arr("z_bar", "mean")

    @property
    def z_mean_se(self):
        return self._arr("z_bar", "se_mean")

    # across-replica variance of the mean fraction (estimates v_t)
    @property
    def v_hat(self):
        return self._arr("z_bar", "variance")

    @property
    def v_hat_se(self):
        return self._arr("z_bar", "se_variance")

    # pooled squared dispersion (estimates x_t)
    @property
    def x_hat(self):
        return self._arr("disp_sq", "mean")

    @property
    def x_hat_se(self):
        return self._arr("disp_sq", "se_mean")

    @property
    def abs_dev(self):
        return self._arr("abs_dev", "mean")

    @property
    def abs_dev_se(self):
        return self._arr("abs_dev", "se_mean")

    @property
    def spread_mean(self):
        return self._arr("spread", "mean")

    @property
    def spread_se(self):
        return self._arr("spread", "se_mean")

    def w_stats(self) -> list[StreamingStats]:
        """Statistics of the rescaled fluctuation sqrt(N) * (Z_bar - mu)."""
        root_n = math.sqrt(self.spec.params.n_urns)
        mu = self.spec.params.mean_fraction
        return [s.scaled(root_n, -root_n * mu) for s in self.stats["z_bar"]]

    def rows(self):
        """Flat (t, estimator, value, stderr, n_samples) records."""
        w = self.w_stats()
        per_time = {
            "z_mean": (self.z_mean, self.z_mean_se),
            "v_hat": (self.v_hat, self.v_hat_se),
            "x_hat": (self.x_hat, self.x_hat_se),
            "abs_dev": (self.abs_dev, self.abs_dev_se),
            "spread_mean": (self.spread_mean, self.spread_se),
            "w_var": (
                np.array([s.variance for s in w]),
                np.array([s.se_variance for s in w]),
            ),
        }
        for k, t in enumerate(self.times):
            for name, (val, se) in per_time.items():
                if name not in self.spec.estimators:
                    continue
                yield {
                    "t": int(t),
                    "estimator": name,
                    "value": float(val[k]),
                    "stderr": float(se[k]),
                    "n_samples": int(self.stats["z_bar"][k].count),
                }


def _shard_bounds(replicas: int, shard_size: int):
    return [(lo, min(lo + shard_size, replicas)) for lo in range(0, replicas, shard_size)]


def _simulate_shard(spec: EnsembleSpec, lo: int, hi: int, times: np.ndarray):
    """Simulate replicas [lo, hi) and reduce them at each recorded time."""
    params = spec.params
    n, m, alpha = params.n_urns, params.total_init, params.alpha
    source = UniformSource(spec.seed, DYNAMICS_STREAM)
    counts = np.full((hi - lo, n), params.red_init, dtype=np.int64)

    record_at = {int(t): k for k, t in enumerate(times)}
    stats = {name: [None] * len(times) for name in ("z_bar", "disp_sq", "abs_dev", "spread")}
    samples = {name: [None] * len(times) for name in spec.collect}

    def record(t_now):
        k = record_at[t_now]
        z = counts / (t_now + m)
        z_bar = z.mean(axis=1)
        abs_dev = np.abs(z - z_bar[:, None])
        disp_sq = (abs_dev * abs_dev).mean(axis=1)
        spread = abs_dev.max(axis=1)
        stats["z_bar"][k] = StreamingStats.from_values(z_bar)
        stats["disp_sq"][k] = StreamingStats.from_values(disp_sq)
        stats["abs_dev"][k] = StreamingStats.from_values(abs_dev.mean(axis=1))
        stats["spread"][k] = StreamingStats.from_values(spread)
        local = {"z_bar": z_bar, "spread": spread, "disp_sq": disp_sq, "z": z}
        for name in spec.collect:
            samples[name][k] = local[name]

    if 0 in record_at:
        record(0)
    for t in range(spec.horizon):
        z = counts / (t + m)
        z_bar = z.mean(axis=1)
        probs = (alpha * z_bar)[:, None] + (1.0 - alpha) * z
        u = source.step_uniforms(t, n, lo, hi)
        counts += u <= probs
        if t + 1 in record_at:
            record(t + 1)
    return stats, samples


def run_replicas(spec: EnsembleSpec, threads: int = 1) -> EnsembleEstimates:
    """Run the ensemble and merge shard statistics in a fixed tree order.

    The result is bit-identical for any ``threads`` value: shard boundaries
    depend only on the spec, every replica draws its uniforms at its own
    addresses, and the reduction tree is fixed by shard index.
    """
    times = spec.resolved_times()
    bounds = _shard_bounds(spec.replicas, spec.shard_size)

    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            shard_results = list(pool.map(lambda b: _simulate_shard(spec, *b, times), bounds))
    else:
        shard_results = [_simulate_shard(spec, lo, hi, times) for lo, hi in bounds]

    merged = {
        name: [
            merge_tree([res[0][name][k] for res in shard_results])
            for k in range(len(times))
        ]
        for name in ("z_bar", "disp_sq", "abs_dev", "spread")
    }
    samples = {
        name: np.stack(
            [np.concatenate([res[1][name][k] for res in shard_results]) for k in range(len(times))]
        )
        for name in spec.collect
    }
    return EnsembleEstimates(spec=spec, times=times, stats=merged, samples=samples)
