"""Norms, distances, energy budgets and the blow-up certificate machinery.

All reductions over shells use exact (Shewchuk) summation via
:func:`math.fsum`; the weights ``lam_j**(2s)`` span many orders of magnitude
at realistic truncation levels and naive accumulation would eat the
tolerances the invariants are checked at.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np

from .model import Derivative, ModelParams, ShellState, make_rhs, shell_wavenumbers

if TYPE_CHECKING:  # pragma: no cover
    from .integrator import Trajectory

__all__ = [
    "hs_norm",
    "weak_distance",
    "strong_distance",
    "energy_law_residual",
    "flux_scale",
    "EnergyBudgetReport",
    "energy_budget",
    "LerayHopfResult",
    "leray_hopf_check",
    "BlowupConstants",
    "blowup_constants",
    "lyapunov_value",
    "lyapunov_cross_sum",
    "SandwichReport",
    "check_lyapunov_sandwich",
    "TripleBoundsReport",
    "check_triple_bounds",
    "riccati_lower_bound",
    "riccati_blowup_time",
    "PastBlowupError",
]


def _fsum(values: np.ndarray) -> float:
    return math.fsum(values.tolist())


def _require_finite(x: np.ndarray, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if not np.isfinite(x).all():
        raise ValueError(f"{what} contains non-finite entries")
    return x


def hs_norm(x, s: float, lam: float) -> float:
    """Weighted shell norm ``sqrt(sum_j lam**(2*s*j) * x_j**2)``, ``j >= 1``.

    ``s = 0`` gives the plain Euclidean norm; ``s = 1`` the enstrophy-type
    norm paired with ``lam_j**2`` diffusion.
    """
    x = _require_finite(x, "sequence")
    if x.size == 0:
        return 0.0
    w = shell_wavenumbers(lam, 2.0 * s, x.size + 1)[1:]
    return math.sqrt(_fsum(w * x * x))


def strong_distance(u, v) -> float:
    """Euclidean distance between shell sequences (shorter one zero-padded)."""
    u, v = _pad_pair(u, v)
    return math.sqrt(_fsum((u - v) ** 2))


def _pad_pair(u, v) -> tuple[np.ndarray, np.ndarray]:
    u = _require_finite(u, "sequence u")
    v = _require_finite(v, "sequence v")
    n = max(u.size, v.size)
    if u.size != n:
        u = np.concatenate([u, np.zeros(n - u.size)])
    if v.size != n:
        v = np.concatenate([v, np.zeros(n - v.size)])
    return u, v


def weak_distance(u, v) -> float:
    """Bounded metric generating the weak topology on bounded sets.

    ``sum_n 2**(-n*n) * |u_n - v_n| / (1 + |u_n - v_n|)``; the shorter
    sequence is padded with zeros.  The weights, not the amplitudes, make
    the series converge, so the value is dominated by the lowest shells.
    """
    u, v = _pad_pair(u, v)
    d = np.abs(u - v)
    terms = [2.0 ** (-(n * n)) * dn / (1.0 + dn) for n, dn in enumerate(d.tolist(), start=1)]
    return math.fsum(terms)


# --------------------------------------------------------------------------
# Energy bookkeeping
# --------------------------------------------------------------------------


def energy_law_residual(state: ShellState, deriv: Derivative, params: ModelParams) -> float:
    """Residual of the instantaneous energy law at one state.

    Returns ``sum(a*da + b*db) + nu*|a|_1^2 + mu*|b|_1^2 - sum(b*f)``; the
    nonlinear fluxes telescope, so the exact value is zero and the computed
    one is accumulation rounding.
    """
    terms = (state.a * deriv.da).tolist() + (state.b * deriv.db).tolist()
    r = math.fsum(terms)
    if params.nu != 0.0:
        r += params.nu * hs_norm(state.a, 1.0, params.lam) ** 2
    if params.mu != 0.0:
        r += params.mu * hs_norm(state.b, 1.0, params.lam) ** 2
    if params.forcing_b is not None:
        r -= _fsum(state.b * params.forcing_b)
    return r


def flux_scale(state: ShellState, params: ModelParams) -> float:
    """Cubic magnitude ``sum_j lam_j**(theta+1) * (|a_j| + |b_j|)**3``.

    Majorizes every nonlinear flux term; residuals are judged relative to it.
    """
    w = shell_wavenumbers(params.lam, params.theta + 1.0, params.k + 1)[1:]
    return _fsum(w * (np.abs(state.a) + np.abs(state.b)) ** 3)


def _l2sq(x: np.ndarray) -> float:
    return _fsum(x * x)


@dataclass(frozen=True)
class EnergyBudgetReport:
    """Per-sample energy-law residuals of a trajectory.

    ``instantaneous[i]`` is the spatial residual of the energy law at sample
    ``i`` (zero up to rounding for any state).  ``cumulative[i]`` is
    ``E(t_i) + 2*int_0^{t_i}(nu*|a|_1^2 + mu*|b|_1^2) - E(t_0)`` with the
    dissipation integral taken by the trapezoid rule on the samples.
    ``decay_margin[i]`` is ``exp(-2*min(nu,mu)*(t_i-t_0))*E(t_0) - E(t_i)``
    (nonnegative up to quadrature/integration error).
    """

    times: np.ndarray
    energy: np.ndarray
    instantaneous: np.ndarray
    cumulative: np.ndarray
    decay_margin: np.ndarray
    initial_energy: float

    @property
    def max_cumulative_rel(self) -> float:
        scale = self.initial_energy if self.initial_energy > 0.0 else 1.0
        return float(np.max(np.abs(self.cumulative))) / scale

    @property
    def min_decay_margin_rel(self) -> float:
        scale = self.initial_energy if self.initial_energy > 0.0 else 1.0
        return float(np.min(self.decay_margin)) / scale

    @property
    def max_drift_rel(self) -> float:
        scale = self.initial_energy if self.initial_energy > 0.0 else 1.0
        return float(np.max(np.abs(self.energy - self.initial_energy))) / scale


def energy_budget(traj: "Trajectory", params: ModelParams, kernel=None) -> EnergyBudgetReport:
    """Evaluate the energy law along a trajectory (needs >= 2 samples for
    the cumulative check; a single sample yields zero-length integrals).

    ``kernel`` overrides the right-hand side used for the instantaneous
    residual (defaults to the forward-cascade system of ``params``).
    """
    if not traj.samples:
        raise ValueError("empty trajectory")
    if kernel is None:
        kernel = make_rhs(params)
    times = np.array([s.t for s in traj.samples])
    states = [s.state for s in traj.samples]
    energy = np.array([_l2sq(s.a) + _l2sq(s.b) for s in states])
    dissipation = np.array(
        [
            params.nu * hs_norm(s.a, 1.0, params.lam) ** 2
            + params.mu * hs_norm(s.b, 1.0, params.lam) ** 2
            for s in states
        ]
    )
    inst = np.empty(len(states))
    for i, s in enumerate(states):
        da, db = kernel(s.a, s.b)
        inst[i] = energy_law_residual(s, Derivative(da, db), params)
    e0 = float(energy[0])
    cumulative = np.empty(len(states))
    decay_margin = np.empty(len(states))
    rate = 2.0 * min(params.nu, params.mu)
    for i in range(len(states)):
        integral = np.trapezoid(dissipation[: i + 1], times[: i + 1]) if i > 0 else 0.0
        cumulative[i] = energy[i] + 2.0 * integral - e0
        decay_margin[i] = math.exp(-rate * (times[i] - times[0])) * e0 - energy[i]
    return EnergyBudgetReport(
        times=times,
        energy=energy,
        instantaneous=inst,
        cumulative=cumulative,
        decay_margin=decay_margin,
        initial_energy=e0,
    )


@dataclass(frozen=True)
class LerayHopfResult:
    passed: bool
    slack: float
    slack_rel: float
    t1: float
    t2: float


def leray_hopf_check(
    traj: "Trajectory", params: ModelParams, t1: float, t: float, rel_tol: float = 1e-6
) -> LerayHopfResult:
    """Energy inequality between two sample times (snapped to nearest samples).

    ``slack = E(t1) - E(t) - 2*int_{t1}^{t}(nu*|a|_1^2 + mu*|b|_1^2)``;
    the pair passes when ``slack >= -rel_tol * max(E(t1), 1)``.
    """
    if not traj.samples:
        raise ValueError("empty trajectory")
    times = np.array([s.t for s in traj.samples])
    span = (times[0], times[-1])
    eps = 1e-9 * max(1.0, abs(span[1]))
    for name, value in (("t1", t1), ("t", t)):
        if value < span[0] - eps or value > span[1] + eps:
            raise ValueError(f"{name}={value} outside trajectory span {span}")
    if t1 > t:
        raise ValueError(f"t1={t1} must not exceed t={t}")
    i1 = int(np.argmin(np.abs(times - t1)))
    i2 = int(np.argmin(np.abs(times - t)))
    states = [s.state for s in traj.samples]
    e1 = _l2sq(states[i1].a) + _l2sq(states[i1].b)
    e2 = _l2sq(states[i2].a) + _l2sq(states[i2].b)
    if i2 > i1:
        diss = np.array(
            [
                params.nu * hs_norm(s.a, 1.0, params.lam) ** 2
                + params.mu * hs_norm(s.b, 1.0, params.lam) ** 2
                for s in states[i1 : i2 + 1]
            ]
        )
        integral = float(np.trapezoid(diss, times[i1 : i2 + 1]))
    else:
        integral = 0.0
    slack = e1 - e2 - 2.0 * integral
    scale = max(e1, 1.0)
    return LerayHopfResult(
        passed=slack >= -rel_tol * scale,
        slack=slack,
        slack_rel=slack / scale,
        t1=float(times[i1]),
        t2=float(times[i2]),
    )


# --------------------------------------------------------------------------
# Blow-up certificate
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BlowupConstants:
    """Constant bundle behind the finite-time blow-up argument (d_i = 1).

    ``c3`` is the smaller of the two coefficient combinations ``lhs11`` and
    ``lhs12`` (the conditions only pin a shared positive lower bound, so the
    minimum is the best constant a certificate can carry).  ``cond11`` and
    ``cond12`` record positivity of the respective combination; ``cond13``
    and ``cond14`` are the two direct-substitution sign conditions.  The
    certificate is usable only when ``valid`` is set, which also requires
    ``theta > 3 + gamma``.

    ``sandwich_factor`` is the provable Lyapunov-vs-energy factor
    ``1 + (c1+c2)*lam**(-gamma)``; ``sandwich_factor_printed`` keeps the
    ``lam**(-gamma-1)`` variant that enters ``M0`` and ``riccati_C`` through
    the ``gamma+1``-norm comparison (where that power is justified).
    """

    gamma: float
    lam: float
    theta: float
    nu: float
    mu: float
    epsilon: float
    c0: float
    c1: float
    c2: float
    c3: float
    lhs11: float
    lhs12: float
    cond11: bool
    cond12: bool
    cond13: bool
    cond14: bool
    M1: float
    M0: float
    riccati_C: float
    sandwich_factor: float
    sandwich_factor_printed: float
    valid: bool


def blowup_constants(gamma: float, lam: float, theta: float, nu: float, mu: float) -> BlowupConstants:
    """Evaluate the certificate constants at ``(gamma, lam, theta, nu, mu)``.

    Always returns the bundle; ``valid`` is False when ``theta <= 3 + gamma``
    (``c0`` undefined) or when any condition fails.  The Young-inequality
    balance holds for small ``gamma`` once ``lam`` is large (around 20 and
    up); smaller ``lam`` typically trips cond11/cond12 and is reported as
    such rather than retuned.
    """
    if gamma <= 0.0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    if lam <= 1.0:
        raise ValueError(f"lam must exceed 1, got {lam}")
    if nu < 0.0 or mu < 0.0:
        raise ValueError("diffusivities must be >= 0")

    epsilon = 2.0 * lam ** (-2.0 / 3.0)
    c2_formula = (
        (16.0 / 17.0)
        * (lam ** (2.0 * gamma) - 1.0)
        * lam ** (1.0 / 3.0 + 2.0 * gamma / epsilon - (2.0 * gamma + theta) / 3.0)
    )
    c1 = c2_formula / 1.8
    c2 = 1.8 * c1  # re-derived so the ratio identity is exact in floats

    lhs11 = (
        c1
        * (
            epsilon
            - 0.5 * lam ** (-0.5 * (2.0 * gamma + theta))
            - (1.0 / 3.0) * lam ** ((2.0 / 3.0) * (gamma - theta))
            - (1.0 / 3.0) * lam ** (-2.0 / 3.0)
        )
        - (c2 / 3.0)
        * (lam ** (-(2.0 / 3.0) * (2.0 * gamma + theta + 2.0)) + lam ** (-2.0 * gamma - 4.0 / 3.0))
        - (2.0 / 3.0) * (lam ** (2.0 * gamma) - 1.0) * lam ** (-(2.0 * gamma + theta + 2.0) / 3.0)
    )
    lhs12 = (
        c2
        * (
            epsilon
            - (2.0 / 3.0) * lam ** (-(2.0 / 3.0) * (2.0 * gamma + theta + 2.0))
            - (2.0 / 3.0) * lam ** (-2.0 * gamma - 4.0 / 3.0)
            - 0.5 * lam ** (-0.5 * (2.0 * gamma + theta + 1.0))
        )
        - (2.0 * c1 / 3.0) * (lam ** ((2.0 / 3.0) * (gamma - theta)) + lam ** (-2.0 / 3.0))
        - (4.0 / 3.0) * (lam ** (2.0 * gamma) - 1.0) * lam ** (-(2.0 * gamma + theta + 2.0) / 3.0)
    )
    c3 = min(lhs11, lhs12)
    cond11 = lhs11 > 0.0
    cond12 = lhs12 > 0.0
    cond13 = (
        2.0 * (lam ** (2.0 * gamma) - 1.0)
        - c1
        * (
            epsilon * lam ** (-2.0 * gamma / epsilon + (2.0 * gamma + theta) / 3.0)
            + 0.5 * lam ** (-0.5 * (2.0 * gamma + theta))
        )
        >= 0.0
    )
    cond14 = (
        2.0 * (lam ** (2.0 * gamma) - 1.0)
        - c2
        * (
            epsilon * lam ** (-2.0 * gamma / epsilon + (2.0 * gamma + theta + 1.0) / 3.0)
            + 0.5 * lam ** (-0.5 * (2.0 * gamma + theta + 1.0))
        )
        >= 0.0
    )

    sandwich_printed = 1.0 + (c1 + c2) * lam ** (-gamma - 1.0)
    sandwich = 1.0 + (c1 + c2) * lam ** (-gamma)
    M1 = 2.0 * (nu + mu) + (c1 * nu + c2 * mu) * (1.0 + lam * lam) * lam ** (-gamma - 1.0)

    theta_ok = theta > 3.0 + gamma
    c0sq = lam ** (2.0 * (theta - gamma - 3.0)) - 1.0
    c0 = math.sqrt(c0sq) if theta_ok and c0sq > 0.0 else math.nan
    if math.isfinite(c0) and c3 > 0.0:
        M0 = (4.0 * M1 / (c0 * c3)) * math.sqrt(sandwich_printed)
        riccati_C = 0.25 * c0 * c3 * sandwich_printed**-1.5
    else:
        M0 = math.nan
        riccati_C = math.nan
    valid = theta_ok and cond11 and cond12 and cond13 and cond14

    return BlowupConstants(
        gamma=gamma,
        lam=lam,
        theta=theta,
        nu=nu,
        mu=mu,
        epsilon=epsilon,
        c0=c0,
        c1=c1,
        c2=c2,
        c3=c3,
        lhs11=lhs11,
        lhs12=lhs12,
        cond11=cond11,
        cond12=cond12,
        cond13=cond13,
        cond14=cond14,
        M1=M1,
        M0=M0,
        riccati_C=riccati_C,
        sandwich_factor=sandwich,
        sandwich_factor_printed=sandwich_printed,
        valid=valid,
    )


def lyapunov_cross_sum(x: np.ndarray, gamma: float, lam: float) -> float:
    """Nearest-neighbor sum ``sum_j lam_j**(2*gamma) * x_j * x_{j+1}``."""
    x = _require_finite(x, "sequence")
    if x.size < 2:
        return 0.0
    w = shell_wavenumbers(lam, 2.0 * gamma, x.size)[1:]
    return _fsum(w * x[:-1] * x[1:])


def lyapunov_value(state: ShellState, consts: BlowupConstants) -> float:
    """Blow-up Lyapunov functional at ``state``.

    ``|a|_gamma^2 + |b|_gamma^2 + c1*sum lam_j^{2g} a_j a_{j+1}
    + c2*sum lam_j^{2g} b_j b_{j+1}``.  Meaningful as a certificate quantity
    only on componentwise-nonnegative states (warns otherwise, where the
    cross terms can push it below the energy).
    """
    if float(np.min(state.a)) < 0.0 or float(np.min(state.b)) < 0.0:
        warnings.warn("Lyapunov value evaluated on a state with negative components", stacklevel=2)
    g, lam = consts.gamma, consts.lam
    return (
        hs_norm(state.a, g, lam) ** 2
        + hs_norm(state.b, g, lam) ** 2
        + consts.c1 * lyapunov_cross_sum(state.a, g, lam)
        + consts.c2 * lyapunov_cross_sum(state.b, g, lam)
    )


@dataclass(frozen=True)
class SandwichReport:
    e_gamma: float
    lyapunov: float
    upper: float
    upper_printed: float
    holds: bool
    holds_printed: bool


def check_lyapunov_sandwich(state: ShellState, consts: BlowupConstants) -> SandwichReport:
    """Two-sided comparison of the Lyapunov value against the weighted energy.

    Asserable bound (Cauchy-Schwarz on adjacent shells):
    ``E_gamma <= L <= (1 + (c1+c2)*lam**(-gamma)) * E_gamma`` for nonnegative
    states.  The ``lam**(-gamma-1)`` variant is reported alongside; it fails
    for states with comparable adjacent shells and is not asserted.
    """
    g, lam = consts.gamma, consts.lam
    e_gamma = hs_norm(state.a, g, lam) ** 2 + hs_norm(state.b, g, lam) ** 2
    lyap = lyapunov_value(state, consts)
    upper = consts.sandwich_factor * e_gamma
    upper_printed = consts.sandwich_factor_printed * e_gamma
    tol = 1e-12 * max(e_gamma, 1e-300)
    return SandwichReport(
        e_gamma=e_gamma,
        lyapunov=lyap,
        upper=upper,
        upper_printed=upper_printed,
        holds=(lyap >= e_gamma - tol) and (lyap <= upper + tol),
        holds_printed=(lyap >= e_gamma - tol) and (lyap <= upper_printed + tol),
    )


@dataclass(frozen=True)
class TripleBoundsReport:
    """Margins of the cubic lower bounds and cross-term upper bounds."""

    cubic_a_lhs: float
    cubic_a_rhs: float
    cubic_b_lhs: float
    cubic_b_rhs: float
    cross_a_lhs: float
    cross_a_rhs: float
    cross_b_lhs: float
    cross_b_rhs: float
    all_hold: bool


def check_triple_bounds(state: ShellState, gamma: float, theta: float, lam: float) -> TripleBoundsReport:
    """Verify, on a nonnegative state, the four auxiliary inequalities:

    (i)  ``sum lam_j**(2g+theta) x_j^3 >= c0 * |x|_{g+1}^3`` for x in {a, b},
         with ``c0 = sqrt(lam**(2(theta-g-3)) - 1)`` (needs theta > 3+gamma);
    (ii) ``sum lam_j**(2g+2) x_j x_{j+1} <= lam**(-g-1) * |x|_{g+1}^2``.
    """
    if theta <= 3.0 + gamma:
        raise ValueError(f"cubic bound needs theta > 3 + gamma, got theta={theta}, gamma={gamma}")
    if float(np.min(state.a)) < 0.0 or float(np.min(state.b)) < 0.0:
        raise ValueError("triple bounds require componentwise-nonnegative states")
    c0 = math.sqrt(lam ** (2.0 * (theta - gamma - 3.0)) - 1.0)
    k = state.k
    w_cubic = shell_wavenumbers(lam, 2.0 * gamma + theta, k + 1)[1:]
    w_cross = shell_wavenumbers(lam, 2.0 * gamma + 2.0, k)[1:]

    def cubic(x: np.ndarray) -> tuple[float, float]:
        lhs = _fsum(w_cubic * x**3)
        rhs = c0 * hs_norm(x, gamma + 1.0, lam) ** 3
        return lhs, rhs

    def cross(x: np.ndarray) -> tuple[float, float]:
        lhs = _fsum(w_cross * x[:-1] * x[1:]) if k >= 2 else 0.0
        rhs = lam ** (-gamma - 1.0) * hs_norm(x, gamma + 1.0, lam) ** 2
        return lhs, rhs

    ca_l, ca_r = cubic(state.a)
    cb_l, cb_r = cubic(state.b)
    xa_l, xa_r = cross(state.a)
    xb_l, xb_r = cross(state.b)
    tol = 1e-12
    ok = (
        ca_l >= ca_r - tol * max(ca_r, 1e-300)
        and cb_l >= cb_r - tol * max(cb_r, 1e-300)
        and xa_l <= xa_r + tol * max(xa_r, 1e-300)
        and xb_l <= xb_r + tol * max(xb_r, 1e-300)
    )
    return TripleBoundsReport(
        cubic_a_lhs=ca_l,
        cubic_a_rhs=ca_r,
        cubic_b_lhs=cb_l,
        cubic_b_rhs=cb_r,
        cross_a_lhs=xa_l,
        cross_a_rhs=xa_r,
        cross_b_lhs=xb_l,
        cross_b_rhs=xb_r,
        all_hold=ok,
    )


class PastBlowupError(ValueError):
    """Requested time is at or beyond the comparison solution's blow-up."""


def riccati_blowup_time(L0: float, C: float) -> float:
    """Blow-up time ``2 / (C * sqrt(L0))`` of ``dL/dt = C * L**1.5``."""
    if L0 <= 0.0 or C <= 0.0:
        raise ValueError(f"need L0 > 0 and C > 0, got L0={L0}, C={C}")
    return 2.0 / (C * math.sqrt(L0))


def riccati_lower_bound(L0: float, C: float, t: float) -> float:
    """Exact solution ``L0 / (1 - (C/2)*sqrt(L0)*t)**2`` of the comparison ODE.

    Any trajectory with ``dL/dt >= C*L**1.5`` and ``L(0) = L0`` stays at or
    above this curve, which diverges at ``t* = 2/(C*sqrt(L0))``.
    """
    t_star = riccati_blowup_time(L0, C)
    if t < 0.0:
        raise ValueError(f"t must be >= 0, got {t}")
    if t >= t_star:
        raise PastBlowupError(f"t={t} is past the comparison blow-up time t*={t_star}")
    return L0 / (1.0 - 0.5 * C * math.sqrt(L0) * t) ** 2
