"""Adaptive importance sampling with exponential-family proposals tuned by χ²-divergence descent."""

from .estimators import (
    DivergenceEstimate,
    ParticleSet,
    draw_particles,
    effective_sample_size,
    estimate_rho,
    is_estimate,
    normalize_log_weights,
    snis_estimate,
)
from .exceptions import (
    ConfigError,
    DegenerateWeightsError,
    MissingNormalizerError,
    OAISError,
    ParticleReuseError,
    PreconditionError,
    TargetDomainError,
)
from .gradients import GradientEstimate, finite_diff_check, grad_oracle_gaussian, grad_r_mc, grad_rho_mc
from .harness import ExperimentConfig, RateFit, ResultTable, check_bounds, fit_rate, run_sweep
from .optimize import (
    RunTrace,
    ScheduleConfig,
    last_iterate_shortcut,
    run_exact_gd,
    run_sgd_averaged,
    run_sgd_vanilla,
)
from .oracles import GaussianOracle, QuadratureOracle, locate_minimizer, make_oracle
from .proposal import ExpFamilyProposal, ParameterBox, gaussian_mean_family, project
from .target import (
    TargetDensity,
    TestFunction,
    clamp_test_function,
    indicator_test_function,
    make_gaussian_target,
    make_mixture_target,
)

__version__ = "0.1.0"
