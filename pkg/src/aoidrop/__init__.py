"""Average Age of Information under packet-drop policies.

Closed-form AAoI for single-source DNP/DOP/threshold/randomized policies,
zero-storage multi-source sharing, and a saturated CSMA contention game over
Rayleigh channels — each cross-validated by Monte Carlo simulators.
"""

from .analytic import (
    DNP_OPTIMAL,
    DOP_OPTIMAL,
    UNDETERMINED,
    PolicyVerdict,
    SchemeConstants,
    aaoi_dnp,
    aaoi_dop,
    aaoi_smr,
    aaoi_threshold,
    cycle_moment_identity_gap,
    classify_optimal_policy,
    dnp_beats_dop,
    find_crossover,
    gamma_cycle_moments,
    lower_bound,
    optimize_threshold,
    scheme_constants,
)
from .csma import (
    ChannelModel,
    ChannelMomentCache,
    SuccessStats,
    aaoi_csma,
    best_response,
    cooperative_optimum,
    nash_equilibrium,
    simulate_csma,
    success_stats,
)
from .distributions import (
    Deterministic,
    Empirical,
    Erlang,
    Exponential,
    HyperExponential,
    LogNormal,
    Moments,
    TransferDistribution,
    Uniform,
    Weibull,
    from_spec,
)
from .errors import (
    AoiError,
    ConfigError,
    DegenerateConditioning,
    InvalidPolicy,
    NonfiniteMoment,
    NoSignChange,
    NoSuccessProbability,
)
from .estimate import AaoiEstimate
from .multisource import (
    SourceConfig,
    aaoi_multisource,
    cycle_moments_multisource,
    second_moment_diagnostic,
    simulate_multisource,
)
from .policies import Dnp, Dop, DropPolicy, Randomized, Threshold, policy_from_spec
from .sim import SimConfig, TraceEvent, simulate_policy, simulate_trace

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
