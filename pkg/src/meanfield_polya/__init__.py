"""Simulation and verification toolkit for mean-field interacting Polya urns.

A system of N two-color urns reinforces each urn with probability
alpha * Z_bar + (1 - alpha) * Z_i, coupling every urn to the population mean.
The package provides the exact stochastic dynamics, deterministic second-moment
recursions with a brute-force enumeration oracle, decay-rate analysis of the
synchronization speed, the Gaussian fluctuation limit of the mean fraction,
and a reproducible parallel Monte-Carlo engine, plus a CLI (``mfpolya``).
"""

__version__ = "0.1.0"

from .asymptotics import (
    CriticalDiagnostic,
    ExponentFit,
    QuasiMartingaleReport,
    Regime,
    classify_regime,
    critical_diagnostic,
    fit_power_law,
    quasi_martingale_sum,
)
from .clt import (
    CltReport,
    CltThresholds,
    LimitPath,
    LlnCheck,
    SigmaSchedule,
    clt_moment_test,
    empirical_w,
    lln_check,
    sample_limit_paths,
    sample_limit_process,
    sigma_schedule,
)
from .core import (
    ModelParams,
    SystemState,
    TrajectoryRecord,
    init_system,
    reinforcement_probabilities,
    reinforcement_probability,
    run_trajectory,
    step,
)
from .moments import (
    ExactMoments,
    LimitMomentState,
    MomentSequences,
    MomentState,
    RecursionCoefficients,
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
from .montecarlo import (
    BudgetError,
    EnsembleEstimates,
    EnsembleSpec,
    StreamingStats,
    ks_uniform,
    merge_stats,
    merge_tree,
    run_replicas,
)
from .rng import DYNAMICS_STREAM, GAUSSIAN_STREAM, UniformSource
from .serialize import extract_metadata, parse_serialized, serialize_records

__all__ = [name for name in dir() if not name.startswith("_")]
