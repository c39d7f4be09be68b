"""Natural-gradient guided kernel particle flows on exponential-family manifolds."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DivergenceError,
    NumericalError,
    SingularFisherError,
    SolverError,
    StepFailureError,
)
from .particles import ParticleSet, as_particles
from .manifold import (
    CustomLinearMap,
    FeatureMap,
    FisherMatrix,
    GaussianQuadraticMap,
    InformedPairwiseMap,
    RbfFeatureMap,
    feature_map_from_config,
    feature_mean,
    fisher_estimate,
    rbf_map_from_samples,
)
from .kernels import (
    KernelSpec,
    NtkSpec,
    diagonalized_kernel,
    kernel_cross_grad,
    kernel_gram,
    kernel_value,
    median_heuristic,
    ntk_gram_blocks,
    ntk_kernel,
    ntk_value,
    rbf_kernel,
)
from .ngd import (
    GaussianNaturalParams,
    NatGradResult,
    exact_ngd_step,
    gaussian_moment_to_natural,
    gaussian_natural_to_moment,
    natural_gradient_kl,
    sample_gaussian,
)
from .projection import (
    ProjectionResult,
    TimeKernel,
    alignment_residual,
    default_grid,
    project_change_limit,
    project_change_quadrature,
)
from .flows import (
    DriftSolution,
    FlowConfig,
    eval_drift,
    mmd_flow_velocity,
    run_flow,
    solve_king_drift,
    solve_ntking_drift,
    wgf_velocity,
)
from .stein import (
    GaussianMixtureScore,
    GaussianScore,
    SteinFeatureMap,
    stein_natural_gradient,
)
from .metrics import MmdEstimate, fit_gaussian, gaussian_w2, mmd

__all__ = [
    "ConfigError",
    "CustomLinearMap",
    "DivergenceError",
    "DriftSolution",
    "FeatureMap",
    "FisherMatrix",
    "FlowConfig",
    "GaussianMixtureScore",
    "GaussianNaturalParams",
    "GaussianQuadraticMap",
    "GaussianScore",
    "InformedPairwiseMap",
    "KernelSpec",
    "MmdEstimate",
    "NatGradResult",
    "NtkSpec",
    "NumericalError",
    "ParticleSet",
    "ProjectionResult",
    "RbfFeatureMap",
    "SingularFisherError",
    "SolverError",
    "SteinFeatureMap",
    "StepFailureError",
    "TimeKernel",
    "alignment_residual",
    "as_particles",
    "default_grid",
    "diagonalized_kernel",
    "eval_drift",
    "exact_ngd_step",
    "feature_map_from_config",
    "feature_mean",
    "fisher_estimate",
    "fit_gaussian",
    "gaussian_moment_to_natural",
    "gaussian_natural_to_moment",
    "gaussian_w2",
    "kernel_cross_grad",
    "kernel_gram",
    "kernel_value",
    "median_heuristic",
    "mmd",
    "mmd_flow_velocity",
    "natural_gradient_kl",
    "ntk_gram_blocks",
    "ntk_kernel",
    "ntk_value",
    "project_change_limit",
    "project_change_quadrature",
    "rbf_kernel",
    "rbf_map_from_samples",
    "run_flow",
    "sample_gaussian",
    "solve_king_drift",
    "solve_ntking_drift",
    "stein_natural_gradient",
    "wgf_velocity",
]
