"""Robust quasi-Bayesian estimation against outliers.

Divergence-based posteriors (standard log-likelihood, density-power, gamma)
over the univariate normal model, objective priors (uniform, reference,
moment matching), importance-sampling and quadrature posterior means, the
asymptotic machinery relating them, and a reproducible simulation harness.
"""

__version__ = "0.1.0"

from ._quadrature import DivBayesError, QuadratureError
from .asymptotics import (
    ContaminatedModel,
    ModelDensity,
    NotPositiveDefiniteError,
    SandwichSet,
    are_h,
    holder_bound_check,
    nu_value,
    population_minimizer,
    posterior_mean_shift_limit,
    robustness_residual,
    sandwich,
)
from .inference import (
    ConvergenceError,
    InferenceError,
    WeightedDraws,
    importance_posterior_mean,
    minimum_divergence_estimate,
    posterior_mean_quadrature,
    quasi_log_posterior,
)
from .losses import (
    DivergenceSpec,
    EmptySampleError,
    QDerivs,
    empirical_risk,
    q_derivs,
    q_value,
)
from .model import (
    InvalidParameterError,
    LogDerivs,
    Theta,
    log_density,
    log_derivs,
    power_integral,
    power_integral_quad,
    tilted_expectation,
)
from .priors import (
    PriorSpec,
    density_power_matching_constant,
    log_prior,
    matching_prior_sigma_exponent,
    moment_matching_residual,
    reference_log_prior_quadrature,
    sigma_exponent,
)
from .simulation import (
    ExperimentConfig,
    SimulationError,
    SummaryTable,
    SweepResult,
    generate_sample,
    run_experiment,
    sweep,
)

__all__ = [
    "__version__",
    "DivBayesError",
    "QuadratureError",
    "Theta",
    "LogDerivs",
    "InvalidParameterError",
    "log_density",
    "log_derivs",
    "power_integral",
    "power_integral_quad",
    "tilted_expectation",
    "DivergenceSpec",
    "QDerivs",
    "EmptySampleError",
    "q_value",
    "q_derivs",
    "empirical_risk",
    "PriorSpec",
    "log_prior",
    "sigma_exponent",
    "reference_log_prior_quadrature",
    "moment_matching_residual",
    "matching_prior_sigma_exponent",
    "density_power_matching_constant",
    "WeightedDraws",
    "quasi_log_posterior",
    "importance_posterior_mean",
    "posterior_mean_quadrature",
    "minimum_divergence_estimate",
    "InferenceError",
    "ConvergenceError",
    "ContaminatedModel",
    "ModelDensity",
    "SandwichSet",
    "NotPositiveDefiniteError",
    "sandwich",
    "nu_value",
    "posterior_mean_shift_limit",
    "robustness_residual",
    "holder_bound_check",
    "are_h",
    "population_minimizer",
    "ExperimentConfig",
    "SummaryTable",
    "SweepResult",
    "SimulationError",
    "generate_sample",
    "run_experiment",
    "sweep",
]
