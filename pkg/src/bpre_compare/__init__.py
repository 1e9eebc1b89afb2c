"""Comparison of two branching processes in random environments.

Simulate two supercritical processes driven by correlated environments,
standardise the difference of their log growth rates into ``R`` and build
intervals and tests for the criticality parameters.
"""

from .environment import (
    CriticalityParams,
    EnvironmentFamily,
    FamilyKind,
    PairCorrelation,
    env_moments,
    pair_correlation,
    sample_environment,
    sample_offspring_sum,
)
from .exceptions import (
    BPREError,
    ConfigError,
    DegenerateEnvironment,
    DegenerateVariance,
    DomainError,
    InsufficientSamples,
    PrecisionError,
    ValidityWarning,
)
from .inference import Interval, Method, TestResult, ci_mu_diff, ci_sigma_sq, test_mu_equal
from .rng import RandomStream
from .simulation import (
    PairedTrajectory,
    SimConfig,
    Trajectory,
    replicate,
    simulate_endpoints,
    simulate_pair,
    simulate_trajectory,
)
from .special import chi2_quantile_1df, phi_cdf, phi_quantile, phi_quantile_asymptotic
from .statistic import (
    ComparisonStatistic,
    Decomposition,
    decompose,
    r_statistic,
    single_process_statistic,
    v_mn_rho,
)
from .verify import (
    SampleSet,
    VerificationReport,
    coverage_study,
    ks_distance,
    nonuniform_profile,
    run_suite,
    tail_ratio_curve,
    true_parameters,
    wasserstein1,
)

__version__ = "0.1.0"
