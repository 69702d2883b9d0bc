"""heatlab: a numerical laboratory for heat kernels of model magnetic
Laplacians on C^n, their scaled-operator limits, and exact torus
Landau-level oracles."""

from .errors import (
    AccuracyError,
    ArgumentError,
    ConfigError,
    DomainError,
    HeatlabError,
    InvariantViolation,
    NumericalError,
    ResourceLimitError,
)
from .geometry import (
    CurvatureEndomorphism,
    CurvatureField,
    FiberEndomorphism,
    Perturbation,
    WeightFunction,
    asymptotic_diagonal,
    curvature_at,
    morse_bound,
    morse_index,
    read_curvature_field,
    twist_endomorphism,
)
from .model_kernels import KernelValue, ModelSpec, mehler_scalar, model_diagonal, model_kernel, weighted_kernel
from .operators import (
    DiscreteOperator,
    GridSpec,
    PerturbationSpec,
    assemble_model,
    assemble_scaled,
    gauge_diagonal_identity_check,
    to_matrix_market,
)
from .semigroup import (
    ConvergenceReport,
    SemigroupMethod,
    converge_in_k,
    heat_apply,
    heat_trace,
    kernel_diagonal,
    spectral_bound_check,
)
from .torus import (
    EllipticCurveBundle,
    SpectrumTable,
    heat_trace_exact,
    heat_trace_truncated,
    landau_spectrum,
    morse_trace_inequality,
    product_torus_morse,
    validate_landau_levels,
)

__version__ = "0.1.0"
