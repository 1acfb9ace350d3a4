"""Desk-scale numerical laboratory for the homogenization of
(-Laplacian + 1 - i V_eps) u = f with a large imaginary random potential."""

__version__ = "0.1.0"

from .grid import (
    H1,
    HMINUS1,
    L2,
    SpectralField,
    TorusGrid,
    apply_multiplier,
    from_nodal,
    from_spectral,
    gradient,
    norm,
    rescale_argument,
    vector_norm,
    zero_field,
)
from .fields import (
    FieldRealization,
    SpectrumModel,
    check_admissibility,
    empirical_correlation,
    fourth_moment_residual,
    mode_variances,
    rho_discrete,
    rho_spectral,
    synthesize,
)
from .corrector import (
    CorrectorBundle,
    HomogSolution,
    expansion,
    rho_empirical,
    solve_corrector,
    solve_homogenized,
)
from .hetero import (
    ErrorMetrics,
    HeteroSolution,
    SolverConfig,
    bump_source,
    error_metrics,
    solve_hetero,
)
from .kernels import (
    ConvolutionCase,
    GreenKernel,
    build_feps,
    convolution_lemma_check,
    feps_moments,
    green_bound_check,
    lemma_sweep,
)
from .experiments import (
    ExperimentConfig,
    ExperimentRecord,
    cell_seed,
    default_config,
    emit_report,
    fit_rate,
    run_campaign,
)

__all__ = [
    "H1",
    "HMINUS1",
    "L2",
    "SpectralField",
    "TorusGrid",
    "apply_multiplier",
    "from_nodal",
    "from_spectral",
    "gradient",
    "norm",
    "rescale_argument",
    "vector_norm",
    "zero_field",
    "FieldRealization",
    "SpectrumModel",
    "check_admissibility",
    "empirical_correlation",
    "fourth_moment_residual",
    "mode_variances",
    "rho_discrete",
    "rho_spectral",
    "synthesize",
    "CorrectorBundle",
    "HomogSolution",
    "expansion",
    "rho_empirical",
    "solve_corrector",
    "solve_homogenized",
    "ErrorMetrics",
    "HeteroSolution",
    "SolverConfig",
    "bump_source",
    "error_metrics",
    "solve_hetero",
    "ConvolutionCase",
    "GreenKernel",
    "build_feps",
    "convolution_lemma_check",
    "feps_moments",
    "green_bound_check",
    "lemma_sweep",
    "ExperimentConfig",
    "ExperimentRecord",
    "cell_seed",
    "default_config",
    "emit_report",
    "fit_rate",
    "run_campaign",
]
