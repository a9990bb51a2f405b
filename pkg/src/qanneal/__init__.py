"""Annealing between unnormalized densities along power-mean paths.

The package builds deformed-log interpolations between a tractable base and an
unnormalized target, and estimates log normalizing constants along them with
annealed importance sampling and sequential Monte Carlo.
"""

from qanneal._version import __version__
from qanneal.deformed import (
    OrderQ,
    RhoChoice,
    exp_q,
    exp_q_prod_collapsed,
    exp_q_sum_factored,
    free_energy_to_multiplicative,
    is_geometric_order,
    ln_q,
    ln_q_exp,
    power_mean,
    rho_from_log_weights,
)
from qanneal.densities import (
    GridDensity,
    LogisticModel,
    ParetoParams,
    StudentTParams,
    UnnormalizedDensity,
    gaussian,
    grid_from_density,
    logistic_posterior,
    logistic_prior,
    nu_from_q,
    pareto,
    q_from_nu,
    q_from_xi,
    student_t,
    with_log_scale,
    xi_from_q,
)
from qanneal.divergences import (
    ArgminCertificate,
    DivergenceWeights,
    alpha_divergence,
    certify_argmin,
    extended_kl,
    grid_power_mean,
    variational_objective,
)
from qanneal.hmc import HmcConfig, hmc_step, leapfrog, tune_step_size
from qanneal.io import (
    ConfigError,
    RunConfig,
    RunReport,
    load_binary_regression_csv,
    report_from_json,
    report_to_json,
    write_report_json,
    write_trace_csv,
)
from qanneal.paths import (
    MomentPath,
    QExpFamilyParams,
    QPath,
    blend_log_ratio,
    gaussian_natural_params,
    geometric_path,
    moment_path_params,
    qpath_gradient,
    qpath_log_density,
    same_family_qpath_params,
    student_t_natural_params,
)
from qanneal.samplers import (
    AisResult,
    ParticleSystem,
    SmcDiagnostics,
    WeightCollapseError,
    ais_forward,
    ais_reverse,
    bdmc_gap,
    ess_of_log_weights,
    smc_run,
    systematic_resample,
)
from qanneal.schedules import (
    HeuristicConfig,
    HeuristicResult,
    Schedule,
    adaptive_next_beta,
    ess_heuristic_q,
    linear_schedule,
    q_grid,
)

__all__ = [
    "AisResult",
    "ArgminCertificate",
    "ConfigError",
    "DivergenceWeights",
    "GridDensity",
    "HeuristicConfig",
    "HeuristicResult",
    "HmcConfig",
    "LogisticModel",
    "MomentPath",
    "OrderQ",
    "ParetoParams",
    "ParticleSystem",
    "QExpFamilyParams",
    "QPath",
    "RhoChoice",
    "RunConfig",
    "RunReport",
    "Schedule",
    "SmcDiagnostics",
    "StudentTParams",
    "UnnormalizedDensity",
    "WeightCollapseError",
    "adaptive_next_beta",
    "ais_forward",
    "ais_reverse",
    "alpha_divergence",
    "bdmc_gap",
    "blend_log_ratio",
    "certify_argmin",
    "ess_heuristic_q",
    "ess_of_log_weights",
    "exp_q",
    "exp_q_prod_collapsed",
    "exp_q_sum_factored",
    "extended_kl",
    "free_energy_to_multiplicative",
    "gaussian",
    "gaussian_natural_params",
    "geometric_path",
    "grid_from_density",
    "grid_power_mean",
    "hmc_step",
    "is_geometric_order",
    "leapfrog",
    "linear_schedule",
    "ln_q",
    "ln_q_exp",
    "load_binary_regression_csv",
    "logistic_posterior",
    "logistic_prior",
    "moment_path_params",
    "nu_from_q",
    "pareto",
    "power_mean",
    "q_from_nu",
    "q_from_xi",
    "q_grid",
    "qpath_gradient",
    "qpath_log_density",
    "report_from_json",
    "report_to_json",
    "rho_from_log_weights",
    "same_family_qpath_params",
    "smc_run",
    "student_t",
    "student_t_natural_params",
    "systematic_resample",
    "tune_step_size",
    "variational_objective",
    "with_log_scale",
    "write_report_json",
    "write_trace_csv",
    "xi_from_q",
    "__version__",
]
