"""Dyadic shell models of Hall MHD: simulation and property verification."""

from .diagnostics import (
    BlowupConstants,
    EnergyBudgetReport,
    LerayHopfResult,
    PastBlowupError,
    SandwichReport,
    TripleBoundsReport,
    blowup_constants,
    check_lyapunov_sandwich,
    check_triple_bounds,
    energy_budget,
    energy_law_residual,
    flux_scale,
    hs_norm,
    leray_hopf_check,
    lyapunov_cross_sum,
    lyapunov_value,
    riccati_blowup_time,
    riccati_lower_bound,
    strong_distance,
    weak_distance,
)
from .integrator import (
    BLOWUP_SUSPECTED,
    COMPLETED,
    OVERFLOW,
    STEP_COLLAPSE,
    DiagnosticsRow,
    DiagnosticsSpec,
    EventRecord,
    IntegratorOptions,
    Sample,
    Trajectory,
    integrate,
    step,
)
from .model import (
    BLOWUP_CANDIDATE,
    GLOBAL_STRONG,
    LOCAL_STRONG,
    UNCLASSIFIED,
    Derivative,
    GeneralCoefficients,
    ModelParams,
    RegimeReport,
    RescaledParams,
    ShellState,
    classify_regime,
    delta_from_theta,
    forward_cascade_coefficients,
    make_params,
    make_rhs,
    rescale_alpha,
    rescale_alpha_inverse,
    rhs_galerkin,
    rhs_general,
    shell_wavenumbers,
    theta_from_delta,
)

__version__ = "0.1.0"
