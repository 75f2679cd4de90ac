"""Fractional potential theory on truncated metric measure samples.

Dense-matrix laboratory for scale-localized averaging on Ahlfors regular
samples (lines, planes, gasket and Cantor blowups): smoothing kernels and
their scale derivatives, Bessel/Riesz-type potential kernels with exact
analytic tails, fractional derivatives, contraction-based inversion,
smoothness functionals, and a spectral Euclidean cross-check.
"""

from .approx_id import (
    AICollection,
    BumpProfile,
    KernelMatrix,
    ScaleGrid,
    build_ai_collection,
    calderon_residual,
    q_kernel,
    t_operator,
    verify_ai_properties,
)
from .errors import (
    BoundaryScaleError,
    ConfigError,
    ConvergenceError,
    DegenerateRadiusError,
    DegenerateScaleError,
    GuardViolationError,
    HypothesisViolationError,
    InsufficientGeometryError,
    InsufficientScalesError,
    InvalidRegimeError,
    NotContractiveError,
)
from .euclidean import (
    PeriodicGrid,
    classical_bessel,
    classical_frac_derivative,
    euclidean_consistency,
    gaussian_battery,
    multiplier_conversion,
    profile_autocorrelation,
    riesz_weight_constant,
)
from .fitting import FitResult, binned_loglog_slope, loglog_slope
from .kernels import (
    KernelRequest,
    PotentialKernel,
    assemble_kernels,
    bessel_kernel,
    frac_deriv_kernel,
    guard_restricted_kernel,
    recommended_t_max,
    recommended_t_min,
    riesz_kernel,
    verify_kernel_lemmas,
    write_kernel_csv,
)
from .norms import (
    NormBundle,
    besov_norm,
    bump_battery,
    centered_bump,
    hajlasz_constant,
    holder_seminorm,
    improvement_experiment,
    maximal_function,
    modulus_of_continuity,
    norm_bundle,
    poincare_check,
    power_bump,
    sobolev_embedding_experiment,
    stability_check,
)
from .operators import (
    ContractionReport,
    apply_bessel,
    apply_frac_derivative,
    bessel_matrix,
    contraction_norm,
    frac_derivative_matrix,
    invert_bessel,
    q_representation_check,
    residual_operator,
    t_alpha_v_kernel,
)
from .reports import Check, PropertyReport, format_float, write_csv
from .space import (
    GuardRegion,
    MetricMeasureSpace,
    ahlfors_fit,
    ball,
    build_cantor_space,
    build_gasket_space,
    build_line_space,
    build_plane_space,
    integrate,
    load_space,
    lp_norm,
    space_from_descriptor,
    write_descriptor,
    write_points_csv,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # spaces
    "MetricMeasureSpace",
    "GuardRegion",
    "build_line_space",
    "build_plane_space",
    "build_gasket_space",
    "build_cantor_space",
    "space_from_descriptor",
    "load_space",
    "write_descriptor",
    "write_points_csv",
    "ball",
    "integrate",
    "lp_norm",
    "ahlfors_fit",
    # approximation of the identity
    "BumpProfile",
    "ScaleGrid",
    "KernelMatrix",
    "AICollection",
    "build_ai_collection",
    "t_operator",
    "q_kernel",
    "verify_ai_properties",
    "calderon_residual",
    # potential kernels
    "PotentialKernel",
    "KernelRequest",
    "assemble_kernels",
    "bessel_kernel",
    "riesz_kernel",
    "frac_deriv_kernel",
    "guard_restricted_kernel",
    "verify_kernel_lemmas",
    "recommended_t_max",
    "recommended_t_min",
    "write_kernel_csv",
    # operators
    "apply_bessel",
    "apply_frac_derivative",
    "bessel_matrix",
    "frac_derivative_matrix",
    "residual_operator",
    "ContractionReport",
    "contraction_norm",
    "invert_bessel",
    "q_representation_check",
    "t_alpha_v_kernel",
    # norms and experiments
    "maximal_function",
    "modulus_of_continuity",
    "besov_norm",
    "holder_seminorm",
    "hajlasz_constant",
    "bump_battery",
    "power_bump",
    "centered_bump",
    "improvement_experiment",
    "sobolev_embedding_experiment",
    "poincare_check",
    "NormBundle",
    "norm_bundle",
    "stability_check",
    # Euclidean reference
    "profile_autocorrelation",
    "riesz_weight_constant",
    "multiplier_conversion",
    "PeriodicGrid",
    "classical_frac_derivative",
    "classical_bessel",
    "gaussian_battery",
    "euclidean_consistency",
    # reporting and fitting
    "PropertyReport",
    "Check",
    "format_float",
    "write_csv",
    "FitResult",
    "loglog_slope",
    "binned_loglog_slope",
    # errors
    "DegenerateScaleError",
    "BoundaryScaleError",
    "InsufficientScalesError",
    "GuardViolationError",
    "DegenerateRadiusError",
    "HypothesisViolationError",
    "InvalidRegimeError",
    "InsufficientGeometryError",
    "ConfigError",
    "NotContractiveError",
    "ConvergenceError",
]
