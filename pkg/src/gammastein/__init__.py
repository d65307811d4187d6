"""Robust inference for unnormalized models via density-power weighted
Stein operators: score-matching estimators, kernelized discrepancy tests,
particle variational inference, and data-driven robustness tuning."""

__version__ = "0.1.0"

from .errors import (
    DegenerateConcentrationError,
    DegenerateWeightError,
    DirectionUndefinedError,
    DomainCoverageError,
    DomainError,
    EvaluationError,
    FitError,
    GammaSteinError,
    SamplerStuckError,
)
from .fields import TestField, field_consistency_check
from .ksd import (
    GofTestResult,
    KsdResult,
    RbfKernel,
    gof_test,
    ksd_ustat,
    median_bandwidth,
    stein_kernel,
)
from .models import (
    Dataset,
    FisherBingham,
    Gaussian,
    PoissonRegressionSampler,
    Quartic,
    SphericalMixture,
    VonMisesFisher,
    make_model,
    sphere_grad_log,
    sphere_lap_log,
)
from .moments import MomentVector, estimating_mean, estimating_values
from .operators import (
    SteinEvaluation,
    apply_gamma_stein,
    correct_field,
    first_variation_check,
    gamma_fisher_divergence,
    mixed_inner_product_check,
    stein_identity_residual,
)
from .quadrature import QuadratureGrid, grid_1d, grid_2d, grid_for_model
from .selection import CvTable, SelectionResult, cv_select, kfold_split, one_se_select
from .solvers import (
    FitResult,
    HomotopySchedule,
    gaussian_fixed_point,
    jacobian_symmetry_diagnostic,
    nmm_em_mle,
    nmm_fit,
    quartic_gamma_fit,
    quartic_mle,
    solve_moment_norm,
    vmf_fixed_point,
    vmf_mle,
)
from .svgd import (
    ParticleEnsemble,
    SvgdConfig,
    TargetSpec,
    gamma_svgd_velocity,
    make_poisson_target,
    poisson_gamma_log_target,
    run_svgd,
    svgd_velocity,
)
from .estimators import (
    GammaGaussianEstimator,
    GammaMixtureEstimator,
    GammaQuarticEstimator,
    GammaSelectorCV,
    GammaSvgdPoissonRegressor,
    GammaVonMisesFisherEstimator,
    MixtureEMEstimator,
    QuarticMLE,
    VonMisesFisherMLE,
)
