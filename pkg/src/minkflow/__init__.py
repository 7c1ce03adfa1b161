"""Curvature flow solver for the planar Minkowski problem of p-harmonic measure."""

from .errors import (
    CollarError,
    ConvexityError,
    DegenerateGradientError,
    InputError,
    MeshError,
    MinkflowError,
    SolverError,
    StationarityError,
    StepError,
)
from .estimator import MinkowskiFlow
from .flow import (
    DiagnosticsRecord,
    FlowConfig,
    FlowResult,
    FlowState,
    PrescribedDensity,
    evaluate_state,
    flow_speed,
    gamma_functional,
    gamma_scaling_exponent,
    rescale_to_unnormalized,
    run,
    step,
    variation_check,
)
from .measures import (
    AdmissibilityReport,
    MeasureDensity,
    check_admissibility,
    mass_functional,
    measure_density,
)
from .p_harmonic import (
    CollarMesh,
    PHarmonicSolution,
    boundary_gradient,
    build_collar,
    gradient_bound_check,
    radial_oracle,
    solve_p_laplace,
    solve_radial_profile,
)
from .support_geometry import (
    BoundaryCurve,
    CurvatureData,
    SupportFunction,
    area,
    boundary_curve,
    circle_grid,
    curvature,
    derivatives,
    periodic_integral,
    radial_function,
    spectral_derivative,
    symmetrize,
)

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityReport",
    "BoundaryCurve",
    "CollarError",
    "CollarMesh",
    "ConvexityError",
    "CurvatureData",
    "DegenerateGradientError",
    "DiagnosticsRecord",
    "FlowConfig",
    "FlowResult",
    "FlowState",
    "InputError",
    "MeasureDensity",
    "MeshError",
    "MinkflowError",
    "MinkowskiFlow",
    "PHarmonicSolution",
    "PrescribedDensity",
    "SolverError",
    "StationarityError",
    "StepError",
    "SupportFunction",
    "area",
    "boundary_curve",
    "boundary_gradient",
    "build_collar",
    "check_admissibility",
    "circle_grid",
    "curvature",
    "derivatives",
    "evaluate_state",
    "flow_speed",
    "gamma_functional",
    "gamma_scaling_exponent",
    "gradient_bound_check",
    "mass_functional",
    "measure_density",
    "periodic_integral",
    "radial_function",
    "radial_oracle",
    "rescale_to_unnormalized",
    "run",
    "solve_p_laplace",
    "solve_radial_profile",
    "spectral_derivative",
    "step",
    "symmetrize",
    "variation_check",
]
