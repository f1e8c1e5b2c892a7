"""Exact single-system dynamics of N mean-field interacting Polya urns.

Each of N urns starts with ``red_init`` red and ``white_init`` white balls.
At every step each urn independently receives one new red ball with
conditional probability ``alpha * Z_bar + (1 - alpha) * Z_i`` (and a white
ball otherwise), where Z_i is that urn's red fraction and Z_bar the average
red fraction over all urns.  ``alpha`` in [0, 1] is the coupling strength:
alpha = 0 gives N independent classical Polya urns, alpha = 1 reinforces every
urn by the population average alone.

Integer ball counts are the source of truth; fractions are derived on demand
so long trajectories cannot drift.
"""

from dataclasses import dataclass, field

import numpy as np

from .rng import UniformSource


@dataclass(frozen=True)
class ModelParams:
    """Model parameters: urn count, initial composition, coupling strength."""

    n_urns: int
    red_init: int
    white_init: int
    alpha: float

    def __post_init__(self):
        if self.n_urns < 1:
            raise ValueError("n_urns must be >= 1")
        if self.red_init < 1:
            raise ValueError("red_init must be >= 1")
        if self.white_init < 1:
            raise ValueError("white_init must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0,1]")

    @property
    def total_init(self) -> int:
        """Total balls per urn at time 0."""
        return self.red_init + self.white_init

    @property
    def mean_fraction(self) -> float:
        """Expected red fraction at every time, red_init / total_init."""
        return self.red_init / self.total_init


@dataclass(frozen=True)
class SystemState:
    """Time step plus the integer red-ball count of every urn."""

    t: int
    red_counts: np.ndarray

    def total_balls(self, params: ModelParams) -> int:
        return self.t + params.total_init

    def fractions(self, params: ModelParams) -> np.ndarray:
        """Red fraction Z_i of each urn."""
        return self.red_counts / self.total_balls(params)

    def mean_fraction(self, params: ModelParams) -> float:
        """Average red fraction Z_bar over the urns."""
        return float(self.fractions(params).mean())


def init_system(params: ModelParams) -> SystemState:
    """State at t = 0: every urn holds exactly red_init red balls."""
    counts = np.full(params.n_urns, params.red_init, dtype=np.int64)
    counts.setflags(write=False)
    return SystemState(t=0, red_counts=counts)


def reinforcement_probabilities(state: SystemState, params: ModelParams) -> np.ndarray:
    """Conditional probability of a red reinforcement for every urn."""
    z = state.fractions(params)
    return params.alpha * z.mean() + (1.0 - params.alpha) * z


def reinforcement_probability(state: SystemState, params: ModelParams, urn: int) -> float:
    """Reinforcement probability of one urn (0-based index)."""
    if not 0 <= urn < params.n_urns:
        raise IndexError(f"urn index {urn} out of range for {params.n_urns} urns")
    return float(reinforcement_probabilities(state, params)[urn])


def step(state: SystemState, params: ModelParams, uniforms: np.ndarray) -> SystemState:
    """Advance one step, consuming one uniform per urn.

    Urn i is reinforced iff uniforms[i] <= its reinforcement probability
    (inclusive threshold).
    """
    uniforms = np.asarray(uniforms, dtype=float)
    if uniforms.shape != (params.n_urns,):
        raise ValueError(f"expected {params.n_urns} uniforms, got shape {uniforms.shape}")
    probs = reinforcement_probabilities(state, params)
    counts = state.red_counts + (uniforms <= probs)
    counts.setflags(write=False)
    return SystemState(t=state.t + 1, red_counts=counts)


@dataclass
class TrajectoryRecord:
    """Subsampled summary of one trajectory.

    Per recorded time: mean fraction, min/max per-urn fraction and the spread
    max_i |Z_i - Z_bar|.  ``z_full`` optionally keeps the whole fraction
    vector at each recorded time.
    """

    params: ModelParams
    seed: int
    replica: int
    times: np.ndarray
    z_bar: np.ndarray
    z_min: np.ndarray
    z_max: np.ndarray
    spread: np.ndarray
    z_full: np.ndarray | None = None

    def summary_rows(self):
        for k, t in enumerate(self.times):
            yield {
                "t": int(t),
                "z_bar": float(self.z_bar[k]),
                "z_min": float(self.z_min[k]),
                "z_max": float(self.z_max[k]),
                "spread": float(self.spread[k]),
            }

    def full_state_rows(self):
        if self.z_full is None:
            raise ValueError("trajectory was recorded without full state")
        for k, t in enumerate(self.times):
            for i in range(self.params.n_urns):
                yield {"t": int(t), "urn": i, "z": float(self.z_full[k, i])}


def resolve_record_times(horizon: int, record_times=None, record_every: int | None = None) -> np.ndarray:
    """Normalise a recording policy to a sorted array of times within [0, horizon]."""
    if record_times is not None:
        times = np.unique(np.asarray(record_times, dtype=np.int64))
        if times.size and (times[0] < 0 or times[-1] > horizon):
            raise ValueError("record times must lie within [0, horizon]")
        return times
    if record_every is not None:
        if record_every < 1:
            raise ValueError("record_every must be >= 1")
        times = np.arange(0, horizon + 1, record_every, dtype=np.int64)
        if times[-1] != horizon:
            times = np.append(times, horizon)
        return times
    return np.arange(0, horizon + 1, dtype=np.int64)


def run_trajectory(
    params: ModelParams,
    horizon: int,
    source: UniformSource,
    replica: int = 0,
    record_times=None,
    record_every: int | None = None,
    keep_full_state: bool = False,
) -> TrajectoryRecord:
    """Simulate one replica for ``horizon`` steps.

    Uniforms are drawn at the replica's own addresses, so the same
    (params, horizon, seed, replica) always reproduces the identical record,
    and different replicas never share randomness.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    times = resolve_record_times(horizon, record_times, record_every)
    state = init_system(params)

    n_rec = len(times)
    z_bar = np.empty(n_rec)
    z_min = np.empty(n_rec)
    z_max = np.empty(n_rec)
    spread = np.empty(n_rec)
    z_full = np.empty((n_rec, params.n_urns)) if keep_full_state else None

    def record(k, st):
        z = st.fractions(params)
        m = z.mean()
        z_bar[k] = m
        z_min[k] = z.min()
        z_max[k] = z.max()
        spread[k] = np.abs(z - m).max()
        if z_full is not None:
            z_full[k] = z

    next_rec = 0
    if next_rec < n_rec and times[next_rec] == 0:
        record(next_rec, state)
        next_rec += 1
    for t in range(horizon):
        u = source.step_uniforms(t, params.n_urns, replica, replica + 1)[0]
        state = step(state, params, u)
        if next_rec < n_rec and times[next_rec] == state.t:
            record(next_rec, state)
            next_rec += 1

    return TrajectoryRecord(
        params=params,
        seed=source.seed,
        replica=replica,
        times=times,
        z_bar=z_bar,
        z_min=z_min,
        z_max=z_max,
        spread=spread,
        z_full=z_full,
    )
