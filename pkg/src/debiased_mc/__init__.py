"""Unbiased Monte Carlo estimation of sequence limits via randomized
truncation, with variance diagnostics, truncation-law design tools, and
bundled applications (quadrature, root finding, Heston call pricing)."""

from .design import (
    CostDesign,
    GeometricDesign,
    MomentSequence,
    SurvivalProfile,
    cost_constrained_design,
    mse_inflation_factor,
    optimal_geometric_design,
    optimal_survival_profile,
    toy_variance,
)
from .errors import (
    DebiasError,
    DegenerateDesignError,
    DerivativeZeroError,
    DivergentCostError,
    GuardExhaustedError,
    InfeasibleBudgetError,
    InfeasibleDesignError,
    InfeasibleLawError,
    InvalidLevelError,
    InvalidStateError,
    LevelGenerationError,
    UnsupportedQueryError,
)
from .estimator import (
    CHUNK_SIZE,
    EstimateReport,
    Replicate,
    adaptive_replicate,
    pooled_average,
    replicate_arrays,
    replicate_at_level,
    run_estimate,
    single_replicate,
    summarize_replicates,
    validate_pairing,
    within_replicate_variance,
)
from .heston import (
    HESTON_PRESETS,
    HestonLevelModel,
    HestonParams,
    VariancePath,
    bs_call,
    cir_exact_step,
    conditional_price,
    heston_level_model,
    nested_trapezoid_integrals,
    norm_cdf,
    simulate_variance_grid,
    xi_factor,
)
from .laws import AdaptiveLaw, ShiftedGeometricLaw, TableLaw, TruncationLaw
from .sequences import (
    LevelSequenceModel,
    NewtonModel,
    QuadratureModel,
    ToyGeometricModel,
    crude_mc_variance,
    expected_evaluations,
)

__version__ = "0.1.0"
