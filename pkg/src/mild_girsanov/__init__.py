"""Spectral Monte Carlo verification of a mild change-of-measure identity
for semilinear SPDEs with additive white or colored noise.

The law of the drifted mild solution is represented as a weighted
expectation over stochastic-convolution paths; this package samples those
paths exactly at grid nodes (jointly with their driving Brownian
increments), evaluates the importance weight, and cross-checks the
representation against direct simulation, closed-form Ornstein-Uhlenbeck
oracles, and the Gaussian path-space structure (covariance kernel, inverse
covariance, Cameron-Martin norms, Ito isometry, maximal regularity).
"""

from ._kernels import backend_name
from .closed_form import (
    gaussian_char_fn,
    gaussian_density_ratio_1d,
    ou_terminal_mean,
    ou_terminal_variance,
    stationary_variance,
)
from .estimators import (
    WeightedSample,
    direct_expectation,
    log_weight,
    moment_bound_suite,
    semigroup_compare,
    weighted_expectation,
)
from .paths import (
    CovarianceKernel,
    GaussianPathSample,
    TimeGrid,
    empirical_covariance_check,
    inverse_covariance_residual,
    kernel_eval,
    reconstruct_increments,
    sample_convolution,
    sobolev_moment_bound,
)
from .spectral import (
    DriftSpec,
    OperatorSpec,
    custom_drift,
    drift_eval,
    fractional_apply,
    linear_drift,
    semigroup_apply,
    squares_operator,
    tanh_drift,
    trace_diagnostic,
    zero_drift,
)
from .stationary import (
    StationarySample,
    WindowGrid,
    default_window,
    density_ratio_estimate,
    invariant_estimate,
    invariant_window_delta,
    long_run_oracle,
    sample_stationary,
    stationary_log_weight,
    truncation_bound,
)
from .stats import Estimate
from .streams import PathStream, Role
from .volterra import (
    CameronMartinReport,
    DeterministicPath,
    cameron_martin_norm_sq,
    drift_convolution,
    drift_record,
    ito_integral,
    nilpotency_check,
    regularity_check,
    remove_drift,
    solve_mild,
)

__version__ = "0.1.0"
