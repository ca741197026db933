"""Numerical laboratory for a conservative dyadic stochastic cascade."""

from .model import (
    DivergentSeriesError,
    ModelParams,
    Observable,
    ObservableKind,
    Truncation,
    gradient_energy,
    l2_norm_sq,
    relaxation_time,
    wavenumber,
    weighted_norm_sq,
)
from .tridiag import Boundary, StepSizeUnderflowError, TridiagonalOperator
from .sde import (
    IntegratorScheme,
    NonFiniteStateError,
    RotationOrder,
    SchemeKind,
    StabilityWarning,
    flow_matrix,
    ito_drift,
    max_stable_modes,
    noise_increment,
    simulate_coupled_pair,
    simulate_ensemble,
    simulate_path,
    step_euler_maruyama,
    step_rotation_splitting,
)
from .moments import (
    dual_probabilities,
    dual_qmatrix,
    integrate_moments,
    moment_operator,
    moment_rhs,
)
from .heat import (
    GapMethod,
    GapResult,
    MassUnderflowError,
    ScalingLimitError,
    evolve_heat,
    mass_decay_fit,
    relaxation_rate,
    spectral_gap,
    weighted_laplacian,
)
from .chain import (
    BDChainSpec,
    BoundaryCriterionResult,
    ChainPath,
    DishonestyEstimate,
    Outcome,
    boundary_criterion,
    chain_from_qmatrix,
    dishonesty_probability,
    dyadic_chain,
    explosion_criterion,
    simulate_chain,
    survival_curve,
)
from .gaussian import (
    InvarianceReport,
    LerayCheck,
    invariance_test,
    leray_energy_check,
    sample_invariant_gaussian,
)
from .ergodicity import (
    DecayMeasurement,
    DecayMethod,
    FitResult,
    NonpositiveVarianceError,
    RateVerdict,
    fit_rate,
    heat_coefficient_variance,
    nested_mc_variance,
    rate_consistency,
)

__version__ = "0.1.0"
