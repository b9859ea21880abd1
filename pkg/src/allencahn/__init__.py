"""Spectral Galerkin solvers for the stochastic Allen-Cahn equation on [0,1].

Exponential integrators with adaptive, tamed, and hybrid time stepping,
coupled strong-error studies, and the command-line front end `allencahn`.
"""

from .drift import (
    CubicDrift,
    apply_drift,
    drift_l2_norm,
    evaluate_drift,
    inner_product_x_f,
)
from .errors import BlowUpError, ConfigError, RunawayPartitionError, StudyError
from .experiments import (
    FitResult,
    SampleOutcome,
    SpatialResult,
    StudyConfig,
    StudyResult,
    convergence_study,
    coupled_error_sample,
    fit_order,
    initial_state,
    rms_error,
    spatial_study,
    stability_monitor,
)
from .config import load_config, load_preset, parse_config, render_config
from .noise import NoiseSpec, NoiseStream, increment_stddev
from .spectral import (
    GridField,
    SpectralField,
    apply_fractional_power,
    apply_semigroup,
    eigenvalues,
    forward_transform,
    grid_points,
    inverse_transform,
    l2_norm,
    lp_norm,
    sobolev_norm,
    sup_norm,
)
from .stepping import (
    Scheme,
    StepRecord,
    TimestepLaw,
    ae_step,
    compute_timestep,
    hybrid_step,
    integrate,
    tamed_step,
)
from .validation import run_validation

__version__ = "0.1.0"

__all__ = [
    "BlowUpError",
    "ConfigError",
    "CubicDrift",
    "FitResult",
    "GridField",
    "NoiseSpec",
    "NoiseStream",
    "RunawayPartitionError",
    "SampleOutcome",
    "Scheme",
    "SpatialResult",
    "SpectralField",
    "StepRecord",
    "StudyConfig",
    "StudyError",
    "StudyResult",
    "TimestepLaw",
    "ae_step",
    "apply_drift",
    "apply_fractional_power",
    "apply_semigroup",
    "compute_timestep",
    "convergence_study",
    "coupled_error_sample",
    "drift_l2_norm",
    "eigenvalues",
    "evaluate_drift",
    "fit_order",
    "forward_transform",
    "grid_points",
    "hybrid_step",
    "increment_stddev",
    "initial_state",
    "inner_product_x_f",
    "integrate",
    "inverse_transform",
    "l2_norm",
    "load_config",
    "load_preset",
    "lp_norm",
    "parse_config",
    "render_config",
    "rms_error",
    "run_validation",
    "sobolev_norm",
    "spatial_study",
    "stability_monitor",
    "sup_norm",
    "tamed_step",
    "__version__",
]
