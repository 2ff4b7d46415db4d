"""Dyadic (shell) models of Hall MHD with an intermittency exponent.

The state is a pair of shell-amplitude sequences ``(a_j, b_j)``, ``j = 1..k``,
on wavenumbers ``lam_j = lam**j`` with zero ghost shells at ``j = 0`` and
``j = k + 1``.  The forward-cascade system integrated by default is

    da_j/dt = -nu*lam_j^2*a_j - lam_j^th*a_j*a_{j+1} + lam_{j-1}^th*a_{j-1}^2
              + lam_j^th*b_j*b_{j+1} - lam_{j-1}^th*b_{j-1}^2
    db_j/dt = -mu*lam_j^2*b_j - lam_j^th*a_j*b_{j+1} + lam_j^th*b_j*a_{j+1}
              - d_i*(lam_j^(th+1)*b_j*b_{j+1} - lam_{j-1}^(th+1)*b_{j-1}^2) + f_j

with ``th = (5 - delta)/2`` tying the nonlinearity strength to the
intermittency dimension ``delta`` of the turbulent fields.  The general
model (:func:`rhs_general`) carries separate forward/backward cascade
weights for every quadratic channel plus an asymmetric coupling ``zeta``.

The truncation keeps incoming-flux terms in row ``j = k`` and drops every
term referencing shells above ``k``; with zero diffusivities the truncated
nonlinearity cancels exactly in the total energy ``sum(a_j^2 + b_j^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "ModelParams",
    "GeneralCoefficients",
    "ShellState",
    "Derivative",
    "RegimeReport",
    "RescaledParams",
    "make_params",
    "theta_from_delta",
    "delta_from_theta",
    "forward_cascade_coefficients",
    "shell_wavenumbers",
    "make_rhs",
    "rhs_galerkin",
    "rhs_general",
    "classify_regime",
    "rescale_alpha",
    "rescale_alpha_inverse",
    "GLOBAL_STRONG",
    "LOCAL_STRONG",
    "BLOWUP_CANDIDATE",
    "UNCLASSIFIED",
]

GLOBAL_STRONG = "GlobalStrong"
LOCAL_STRONG = "LocalStrong"
BLOWUP_CANDIDATE = "BlowupCandidate"
UNCLASSIFIED = "Unclassified"

DELTA_PHYSICAL = "physical"
DELTA_BOUNDARY = "boundary"
DELTA_UNPHYSICAL = "unphysical"

RhsKernel = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]


def theta_from_delta(delta: float) -> float:
    """Nonlinearity exponent from the intermittency dimension."""
    return (5.0 - delta) / 2.0


def delta_from_theta(theta: float) -> float:
    """Intermittency dimension from the nonlinearity exponent."""
    return 5.0 - 2.0 * theta


def _classify_delta(delta: float) -> str:
    if delta < 0.0 or delta > 3.0:
        return DELTA_UNPHYSICAL
    if delta == 0.0 or delta == 3.0:
        return DELTA_BOUNDARY
    return DELTA_PHYSICAL


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ModelParams:
    """Validated model parameters; fully determines the right-hand side.

    ``theta`` and ``delta`` are stored together and kept consistent by
    :func:`make_params`.  ``delta_regime`` flags where ``delta`` sits
    relative to the physical range [0, 3]; values outside it are accepted
    (the blow-up regime needs theta > 3, i.e. delta < -1) but flagged.
    """

    lam: float
    theta: float
    delta: float
    nu: float
    mu: float
    d_i: float
    k: int
    forcing_b: Optional[np.ndarray] = None
    delta_regime: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if not self.lam > 1.0:
            raise ValueError(f"wavenumber ratio must exceed 1, got {self.lam}")
        if self.k < 1:
            raise ValueError(f"truncation level must be >= 1, got {self.k}")
        for name in ("nu", "mu", "d_i"):
            value = getattr(self, name)
            if value < 0.0 or not math.isfinite(value):
                raise ValueError(f"{name} must be finite and >= 0, got {value}")
        if not math.isfinite(self.theta):
            raise ValueError("theta must be finite")
        if self.forcing_b is not None:
            f = _as_readonly(self.forcing_b)
            if f.shape != (self.k,):
                raise ValueError(
                    f"forcing must have one entry per shell ({self.k}), got shape {f.shape}"
                )
            if not np.isfinite(f).all():
                raise ValueError("forcing entries must be finite")
            object.__setattr__(self, "forcing_b", f)
        if not self.delta_regime:
            object.__setattr__(self, "delta_regime", _classify_delta(self.delta))

    @property
    def forcing_active(self) -> bool:
        return self.forcing_b is not None and bool(np.any(self.forcing_b != 0.0))


def make_params(
    lam: float,
    *,
    theta: Optional[float] = None,
    delta: Optional[float] = None,
    nu: float = 0.0,
    mu: float = 0.0,
    d_i: float = 0.0,
    k: int,
    forcing_b=None,
) -> ModelParams:
    """Build :class:`ModelParams` from either ``theta`` or ``delta``.

    Exactly one of the two may be omitted; if both are given they must
    satisfy ``theta == (5 - delta)/2`` exactly.
    """
    if theta is None and delta is None:
        raise ValueError("one of theta or delta is required")
    if theta is not None and delta is not None:
        if theta != theta_from_delta(delta):
            raise ValueError(
                f"inconsistent pair: theta={theta} but (5-delta)/2={theta_from_delta(delta)}"
            )
    if theta is None:
        theta = theta_from_delta(delta)
    elif delta is None:
        delta = delta_from_theta(theta)
    return ModelParams(
        lam=float(lam),
        theta=float(theta),
        delta=float(delta),
        nu=float(nu),
        mu=float(mu),
        d_i=float(d_i),
        k=int(k),
        forcing_b=forcing_b,
    )


@dataclass(frozen=True)
class GeneralCoefficients:
    """Channel weights of the general coupled shell model.

    ``alpha*`` weight the forward-cascade channels, ``beta*`` the
    backward-cascade ones, and ``zeta`` the asymmetric coupling that
    exchanges no net energy between the two equations.  ``delta_u`` and
    ``delta_b`` are the intermittency dimensions of the velocity and
    magnetic fields; the derivation assumes the magnetic field is at least
    as intermittent, ``delta_b <= delta_u``.

    ``beta3_forward_velocity`` switches the backward magnetic-coupling term
    from the printed ``a_{j-1} b_j`` to the symmetric-looking
    ``a_{j+1} b_j`` variant.  Off by default; the printed form is what the
    energy bookkeeping below telescopes with.
    """

    delta_u: float
    delta_b: float
    alpha1: float = 1.0
    alpha2: float = 1.0
    alpha3: float = 1.0
    alpha4: float = 1.0
    beta1: float = 0.0
    beta2: float = 0.0
    beta3: float = 0.0
    beta4: float = 0.0
    zeta: float = 0.0
    beta3_forward_velocity: bool = False

    def __post_init__(self) -> None:
        if self.delta_b > self.delta_u:
            raise ValueError(
                f"magnetic intermittency dimension must not exceed the velocity one: "
                f"delta_b={self.delta_b} > delta_u={self.delta_u}"
            )
        for name in ("alpha1", "alpha2", "alpha3", "alpha4", "beta1", "beta2", "beta3", "beta4"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")


def forward_cascade_coefficients(params: ModelParams) -> GeneralCoefficients:
    """Coefficient point that reduces the general model to the default one."""
    return GeneralCoefficients(delta_u=params.delta, delta_b=params.delta)


@dataclass(frozen=True)
class ShellState:
    """Paired shell amplitudes ``(a, b)`` at time ``t`` (arrays are read-only)."""

    a: np.ndarray
    b: np.ndarray
    t: float = 0.0

    def __post_init__(self) -> None:
        a = _as_readonly(self.a)
        b = _as_readonly(self.b)
        if a.ndim != 1 or a.shape != b.shape:
            raise ValueError(f"a and b must be 1-d with equal length, got {a.shape} and {b.shape}")
        if a.size < 1:
            raise ValueError("state needs at least one shell")
        if not (np.isfinite(a).all() and np.isfinite(b).all()):
            raise ValueError("state entries must be finite")
        if not (math.isfinite(self.t) and self.t >= 0.0):
            raise ValueError(f"time must be finite and >= 0, got {self.t}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def k(self) -> int:
        return self.a.size


@dataclass(frozen=True)
class Derivative:
    """Right-hand-side value matching the shape of its source state."""

    da: np.ndarray
    db: np.ndarray


def shell_wavenumbers(lam: float, exponent: float, count: int) -> np.ndarray:
    """``lam**(exponent*j)`` for ``j = 0 .. count-1`` (index 0 is the ghost shell)."""
    return lam ** (exponent * np.arange(count, dtype=np.float64))


def _pad(x: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros(k + 2)
    out[1 : k + 1] = x
    return out


def make_rhs(
    params: ModelParams,
    coeffs: Optional[GeneralCoefficients] = None,
    *,
    include_dissipation: bool = True,
) -> RhsKernel:
    """Compile the right-hand side into a kernel ``(a, b) -> (da, db)``.

    With ``coeffs=None`` the forward-cascade system is produced directly.
    With coefficients, channels whose weight is exactly zero are skipped and
    unit weights multiply exactly, so at the reduction point
    (all alphas 1, betas and zeta 0, equal deltas) the two kernels perform
    the identical float operations in the identical order and agree
    bit-for-bit.  The two velocity-magnetic couplings proportional to
    ``a_{j-1} b_{j-1}`` are combined into one ``(alpha2 - alpha3)`` term for
    the same reason (they cancel identically at the reduction point).

    ``include_dissipation=False`` omits the ``-nu*lam_j^2`` / ``-mu*lam_j^2``
    terms (used by the integrating-factor stepper, which applies them
    exactly).  Constant per-shell forcing, when present, stays in the
    returned kernel.
    """
    k = params.k
    lam = params.lam
    d_i = params.d_i
    lam2 = shell_wavenumbers(lam, 2.0, k + 1)[1:]
    neg_visc_a = -(params.nu * lam2)
    neg_visc_b = -(params.mu * lam2)
    forcing = params.forcing_b

    # The closures below reuse scratch buffers, so a kernel instance must not
    # be shared between concurrently running integrations (each integration
    # builds its own).  Accumulation stays term-by-term in the displayed
    # order; the ghost entries of the padded buffers are written once and
    # never touched again.
    ap = np.zeros(k + 2)
    bp = np.zeros(k + 2)
    t1 = np.empty(k)
    t2 = np.empty(k)

    def mulmul(w, x, y, out):
        # out = (w * x) * y, matching the float ops of the expression form
        np.multiply(w, x, out=out)
        np.multiply(out, y, out=out)
        return out

    if coeffs is None:
        wth = shell_wavenumbers(lam, params.theta, k + 2)
        wth1 = shell_wavenumbers(lam, params.theta + 1.0, k + 2)
        w_c = wth[1 : k + 1]
        w_p = wth[0:k]
        w1_c = wth1[1 : k + 1]
        w1_p = wth1[0:k]

        def galerkin(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
            ap[1 : k + 1] = a
            bp[1 : k + 1] = b
            a_next, a_prev = ap[2:], ap[0:k]
            b_next, b_prev = bp[2:], bp[0:k]
            if include_dissipation:
                da = np.multiply(neg_visc_a, a)
                db = np.multiply(neg_visc_b, b)
            else:
                da = np.zeros(k)
                db = np.zeros(k)
            da -= mulmul(w_c, a, a_next, t1)
            da += mulmul(w_p, a_prev, a_prev, t1)
            da += mulmul(w_c, b, b_next, t1)
            da -= mulmul(w_p, b_prev, b_prev, t1)
            db -= mulmul(w_c, a, b_next, t1)
            db += mulmul(w_c, b, a_next, t1)
            if d_i != 0.0:
                mulmul(w1_c, b, b_next, t1)
                np.subtract(t1, mulmul(w1_p, b_prev, b_prev, t2), out=t1)
                np.multiply(t1, d_i, out=t1)
                db -= t1
            if forcing is not None:
                db += forcing
            return da, db

        return galerkin

    theta_u = theta_from_delta(coeffs.delta_u)
    theta_b = theta_from_delta(coeffs.delta_b)
    wu = shell_wavenumbers(lam, theta_u, k + 2)
    wb = shell_wavenumbers(lam, theta_b, k + 2)
    wb1 = shell_wavenumbers(lam, theta_b + 1.0, k + 2)
    wu_c, wu_p = wu[1 : k + 1], wu[0:k]
    wb_c, wb_p, wb_n = wb[1 : k + 1], wb[0:k], wb[2 : k + 2]
    w1_c, w1_p = wb1[1 : k + 1], wb1[0:k]
    a1c, a2c, a3c, a4c = coeffs.alpha1, coeffs.alpha2, coeffs.alpha3, coeffs.alpha4
    b1c, b2c, b3c, b4c = coeffs.beta1, coeffs.beta2, coeffs.beta3, coeffs.beta4
    zeta = coeffs.zeta
    hall_fwd = d_i * a4c
    hall_bwd = d_i * b4c
    beta3_fwd = coeffs.beta3_forward_velocity

    def scaled(t, c):
        if c != 1.0:
            np.multiply(t, c, out=t)
        return t

    def general(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ap[1 : k + 1] = a
        bp[1 : k + 1] = b
        a_next, a_prev = ap[2:], ap[0:k]
        b_next, b_prev = bp[2:], bp[0:k]
        if include_dissipation:
            da = np.multiply(neg_visc_a, a)
            db = np.multiply(neg_visc_b, b)
        else:
            da = np.zeros(k)
            db = np.zeros(k)
        if a1c != 0.0:
            da -= scaled(mulmul(wu_c, a, a_next, t1), a1c)
            da += scaled(mulmul(wu_p, a_prev, a_prev, t1), a1c)
        if b1c != 0.0:
            mulmul(wu_c, a_next, a_next, t1)
            np.subtract(t1, mulmul(wu_p, a_prev, a, t2), out=t1)
            da -= scaled(t1, b1c)
        if a3c != 0.0:
            da += scaled(mulmul(wb_c, b, b_next, t1), a3c)
            da -= scaled(mulmul(wb_p, b_prev, b_prev, t1), a3c)
        if b3c != 0.0:
            mulmul(wb_n, b_next, b_next, t1)
            np.subtract(t1, mulmul(wb_c, b_prev, b, t2), out=t1)
            da += scaled(t1, b3c)
        if zeta != 0.0:
            np.add(b_prev, b, out=t2)
            np.add(t2, b_next, out=t2)
            np.multiply(wb_c, b, out=t1)
            np.multiply(t1, t2, out=t1)
            da -= scaled(t1, zeta)
        if a2c != 0.0:
            db -= scaled(mulmul(wb_c, a, b_next, t1), a2c)
        if a3c != 0.0:
            db += scaled(mulmul(wb_c, b, a_next, t1), a3c)
        if a2c != a3c:
            db += scaled(mulmul(wb_p, a_prev, b_prev, t1), a2c - a3c)
        if b2c != 0.0:
            mulmul(wb_n, a_next, b_next, t1)
            np.subtract(t1, mulmul(wb_c, a, b_prev, t2), out=t1)
            db -= scaled(t1, b2c)
        if b3c != 0.0:
            mulmul(wb_n, b_next, a_next, t1)
            np.subtract(t1, mulmul(wb_c, a_next if beta3_fwd else a_prev, b, t2), out=t1)
            db += scaled(t1, b3c)
        if zeta != 0.0:
            np.add(b_prev, b, out=t2)
            np.add(t2, b_next, out=t2)
            np.multiply(wb_c, a, out=t1)
            np.multiply(t1, t2, out=t1)
            db += scaled(t1, zeta)
        if hall_fwd != 0.0:
            mulmul(w1_c, b, b_next, t1)
            np.subtract(t1, mulmul(w1_p, b_prev, b_prev, t2), out=t1)
            db -= scaled(t1, hall_fwd)
        if hall_bwd != 0.0:
            mulmul(w1_c, b_next, b_next, t1)
            np.subtract(t1, mulmul(w1_p, b, b_prev, t2), out=t1)
            db -= scaled(t1, hall_bwd)
        if forcing is not None:
            db += forcing
        return da, db

    return general


def _check_lengths(state: ShellState, params: ModelParams) -> None:
    if state.k != params.k:
        raise ValueError(f"state has {state.k} shells but params expect {params.k}")


def rhs_galerkin(state: ShellState, params: ModelParams) -> Derivative:
    """Evaluate the truncated forward-cascade system at ``state``."""
    _check_lengths(state, params)
    da, db = make_rhs(params)(state.a, state.b)
    return Derivative(da=da, db=db)


def rhs_general(state: ShellState, params: ModelParams, coeffs: GeneralCoefficients) -> Derivative:
    """Evaluate the general coupled model (same truncation policy)."""
    _check_lengths(state, params)
    da, db = make_rhs(params, coeffs)(state.a, state.b)
    return Derivative(da=da, db=db)


@dataclass(frozen=True)
class RegimeReport:
    """Well-posedness classification of ``(theta, d_i)``."""

    classification: str
    theta: float
    d_i: float
    basis: str


def classify_regime(params: ModelParams) -> RegimeReport:
    """Classify ``(theta, d_i)`` against the known solution-regime thresholds.

    A pure function of the two arguments: diffusivities, ``lam`` and ``k``
    play no role.
    """
    theta, d_i = params.theta, params.d_i
    if d_i > 0.0:
        if theta <= 1.0:
            cls, basis = GLOBAL_STRONG, "theta <= 1 with Hall term: strong solutions are global"
        elif theta < 2.0:
            cls, basis = LOCAL_STRONG, "1 < theta < 2 with Hall term: strong solutions exist locally"
        elif theta > 3.0:
            cls, basis = (
                BLOWUP_CANDIDATE,
                "theta > 3 with Hall term: large positive data admits finite-time blow-up",
            )
        else:
            cls, basis = UNCLASSIFIED, "2 <= theta <= 3 with Hall term: no known result"
    else:
        if theta <= 2.0:
            cls, basis = GLOBAL_STRONG, "theta <= 2 without Hall term: strong solutions are global"
        elif theta < 3.0:
            cls, basis = LOCAL_STRONG, "2 < theta < 3 without Hall term: strong solutions exist locally"
        else:
            cls, basis = UNCLASSIFIED, "theta >= 3 without Hall term: no known result"
    return RegimeReport(classification=cls, theta=theta, d_i=d_i, basis=basis)


@dataclass(frozen=True)
class RescaledParams:
    """Equivalent system on wavenumbers ``lam_bar**j`` with fractional dissipation.

    The dissipation exponent becomes ``2*alpha`` with ``alpha = 1/theta`` and
    the quadratic channels carry plain ``lam_bar_j`` weights (``lam_bar_j**
    (alpha+1)`` for the Hall channel).  ``alpha < 1/3`` marks the proven
    blow-up side in this parameterization.
    """

    lam_bar: float
    alpha: float
    nu: float
    mu: float
    d_i: float
    k: int


def rescale_alpha(params: ModelParams) -> RescaledParams:
    """Rewrite ``(lam, theta)`` as ``(lam_bar, alpha) = (lam**theta, 1/theta)``."""
    if params.theta <= 0.0:
        raise ValueError(f"rescaling requires theta > 0, got {params.theta}")
    return RescaledParams(
        lam_bar=params.lam**params.theta,
        alpha=1.0 / params.theta,
        nu=params.nu,
        mu=params.mu,
        d_i=params.d_i,
        k=params.k,
    )


def rescale_alpha_inverse(rescaled: RescaledParams) -> tuple[float, float]:
    """Recover ``(lam, theta)`` from the rescaled form."""
    return rescaled.lam_bar**rescaled.alpha, 1.0 / rescaled.alpha
