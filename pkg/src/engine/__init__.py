"""Numerical engine: series, Borel-plane solves, Laplace transforms, thimbles, resurgence."""
from src.engine.errors import (
    BorelError,
    BranchCollision,
    DegenerateChart,
    DegenerateQ,
    DomainError,
    ExactModeUnsupported,
    GammaPoleError,
    IllConditioned,
    InputError,
    InvalidOperator,
    NoConvergence,
    NonSimpleRoots,
    ParameterUnsupported,
    RayHitsRoot,
    RayMisconfigured,
    ResonanceError,
    SchemaError,
    SeedFailure,
    StokesUnstable,
    TailDominates,
    UnstableFit,
)
from src.engine.laplace import (
    BorelSum,
    LaplaceRequest,
    LaplaceValue,
    Tilt,
    borel_sum,
    frequency_residual,
    laplace,
    lateral_pair,
)
from src.engine.ode import (
    CharacteristicDatum,
    Level1Operator,
    apply_operator,
    characteristic_roots,
    datum_for,
    poincare_solution,
)
from src.engine.oracles import OracleResult, airy_ai, bessel_k, hyp2f1
from src.engine.plane import (
    PanelGrid,
    Ray,
    RayGridFunction,
    VolterraOperator,
    continue_along_arc,
    fractional_integral,
    order_shifted_residual,
    picard_solve,
    position_ode,
    taylor_extract,
    volterra_apply,
)
from src.engine.resurgence import (
    AsymptoticFit,
    BorelSummationReport,
    StokesMeasurement,
    asymptotic_fit,
    regularity_verdict,
    remainder_decay_order,
    stokes_constant,
)
from src.engine.series import (
    DeltaPlusSeries,
    ShiftedSeries,
    TransMonomial,
    borel_transform,
    convolution_product,
    formal_laplace,
)
from src.engine.specs import ProblemSpecFile, load_spec
from src.engine.thimble import (
    CriticalPoint,
    ThimbleSpec,
    TracedThimble,
    critical_data,
    projection_identity,
    steepest_descent_series,
    thimble_integral_direct,
    thimble_projection,
    trace_thimble,
)

__all__ = [
    # errors
    "BorelError",
    "BranchCollision",
    "DegenerateChart",
    "DegenerateQ",
    "DomainError",
    "ExactModeUnsupported",
    "GammaPoleError",
    "IllConditioned",
    "InputError",
    "InvalidOperator",
    "NoConvergence",
    "NonSimpleRoots",
    "ParameterUnsupported",
    "RayHitsRoot",
    "RayMisconfigured",
    "ResonanceError",
    "SchemaError",
    "SeedFailure",
    "StokesUnstable",
    "TailDominates",
    "UnstableFit",
    # series_core
    "DeltaPlusSeries",
    "ShiftedSeries",
    "TransMonomial",
    "borel_transform",
    "convolution_product",
    "formal_laplace",
    # ode_level1
    "CharacteristicDatum",
    "Level1Operator",
    "apply_operator",
    "characteristic_roots",
    "datum_for",
    "poincare_solution",
    # borel_plane
    "PanelGrid",
    "Ray",
    "RayGridFunction",
    "VolterraOperator",
    "continue_along_arc",
    "fractional_integral",
    "order_shifted_residual",
    "picard_solve",
    "position_ode",
    "taylor_extract",
    "volterra_apply",
    # laplace_engine
    "BorelSum",
    "LaplaceRequest",
    "LaplaceValue",
    "Tilt",
    "borel_sum",
    "frequency_residual",
    "laplace",
    "lateral_pair",
    # thimble_lab
    "CriticalPoint",
    "ThimbleSpec",
    "TracedThimble",
    "critical_data",
    "projection_identity",
    "steepest_descent_series",
    "thimble_integral_direct",
    "thimble_projection",
    "trace_thimble",
    # resurgence
    "AsymptoticFit",
    "BorelSummationReport",
    "StokesMeasurement",
    "asymptotic_fit",
    "regularity_verdict",
    "remainder_decay_order",
    "stokes_constant",
    # oracles
    "OracleResult",
    "airy_ai",
    "bessel_k",
    "hyp2f1",
    # problem files
    "ProblemSpecFile",
    "load_spec",
]
