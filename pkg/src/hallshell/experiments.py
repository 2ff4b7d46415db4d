"""Reproducible scenarios packaging the model's provable properties.

Each experiment builds its own parameters and data, runs the integrator, and
returns an :class:`ExperimentReport` whose criteria carry a pass flag, a
measured margin and a one-line statement of the property being checked.
Criteria marked informational never fail a report; they record observations
the underlying theory does not pin down (growth in local-only regimes,
behavior below the blow-up threshold, residuals of the asymmetric coupling).

Scenario constants in this module were tuned once for desk-scale runtimes
and are fixed; see the individual experiment docstrings for what is pinned
by the property itself versus chosen here.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Optional, Sequence

import numpy as np

from .diagnostics import (
    blowup_constants,
    energy_budget,
    hs_norm,
    leray_hopf_check,
    lyapunov_value,
    riccati_blowup_time,
    riccati_lower_bound,
    weak_distance,
)
from .integrator import (
    BLOWUP_SUSPECTED,
    COMPLETED,
    OVERFLOW,
    DiagnosticsSpec,
    IntegratorOptions,
    Trajectory,
    integrate,
)
from .model import (
    GeneralCoefficients,
    ModelParams,
    ShellState,
    classify_regime,
    make_params,
)

__all__ = [
    "CriterionResult",
    "ExperimentReport",
    "SweepGrid",
    "SweepResult",
    "single_shell_state",
    "geometric_state",
    "random_positive_state",
    "blowup_front_state",
    "exp_energy_conservation",
    "exp_decay_bound",
    "exp_h1_regimes",
    "exp_blowup",
    "exp_galerkin_convergence",
    "sweep_run",
    "EXPERIMENTS",
]


@dataclass(frozen=True)
class CriterionResult:
    name: str
    passed: Optional[bool]
    margin: Optional[float]
    basis: str
    informational: bool = False
    details: dict = field(default_factory=dict)


@dataclass
class ExperimentReport:
    name: str
    params: dict
    criteria: list[CriterionResult] = field(default_factory=list)
    artifacts: list[str] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.criteria if not c.informational)

    def criterion(self, name: str) -> CriterionResult:
        for c in self.criteria:
            if c.name == name:
                return c
        raise KeyError(name)


def _params_snapshot(params: ModelParams, **extra) -> dict:
    snap = {
        "lambda": params.lam,
        "theta": params.theta,
        "delta": params.delta,
        "nu": params.nu,
        "mu": params.mu,
        "d_i": params.d_i,
        "k": params.k,
    }
    snap.update(extra)
    return snap


# --------------------------------------------------------------------------
# Initial data generators
# --------------------------------------------------------------------------


def single_shell_state(k: int, shell: int = 1, amplitude: float = 1.0, amplitude_b: Optional[float] = None) -> ShellState:
    """All energy in one shell (same shell for both fields)."""
    if not 1 <= shell <= k:
        raise ValueError(f"shell must be in 1..{k}, got {shell}")
    a = np.zeros(k)
    b = np.zeros(k)
    a[shell - 1] = amplitude
    b[shell - 1] = amplitude if amplitude_b is None else amplitude_b
    return ShellState(a=a, b=b)


def geometric_state(
    k: int, lam: float, decay: float, amplitude: float = 1.0, amplitude_b: Optional[float] = None
) -> ShellState:
    """Power-law shells ``x_j = amplitude * lam_j**(-decay)``."""
    prof = lam ** (-decay * np.arange(1, k + 1, dtype=np.float64))
    b_amp = amplitude if amplitude_b is None else amplitude_b
    return ShellState(a=amplitude * prof, b=b_amp * prof)


def random_positive_state(
    k: int, lam: float, gamma: float, e_gamma: float, seed: int
) -> ShellState:
    """Seeded positive state rescaled to a prescribed weighted energy.

    Shapes follow ``lam_j**(-gamma-1)`` with uniform [0.5, 1.5) jitter, then
    both fields are scaled so that ``|a|_gamma^2 + |b|_gamma^2 == e_gamma``.
    """
    rng = np.random.default_rng(seed)
    prof = lam ** ((-gamma - 1.0) * np.arange(1, k + 1, dtype=np.float64))
    a = prof * rng.uniform(0.5, 1.5, size=k)
    b = prof * rng.uniform(0.5, 1.5, size=k)
    e_unit = hs_norm(a, gamma, lam) ** 2 + hs_norm(b, gamma, lam) ** 2
    scale = math.sqrt(e_gamma / e_unit)
    return ShellState(a=scale * a, b=scale * b)


def blowup_front_state(k: int, lam: float, gamma: float, e_gamma: float, head_ratio: float = 0.1) -> ShellState:
    """Positive data concentrating the weighted energy in shells 1 and 2.

    The remaining shells carry a superexponentially small positive floor, so
    the configuration is positive componentwise while the cascade front
    starts at the large scales.
    """
    w = np.empty(k)
    w[0] = 1.0
    if k > 1:
        w[1] = head_ratio
    for j in range(2, k):
        w[j] = max(w[j - 1] * 1e-18, 1e-250)
    e_unit = 2.0 * hs_norm(w, gamma, lam) ** 2
    w = w * math.sqrt(e_gamma / e_unit)
    return ShellState(a=w, b=w)


# --------------------------------------------------------------------------
# Experiments
# --------------------------------------------------------------------------


def exp_energy_conservation(
    params: Optional[ModelParams] = None,
    state0: Optional[ShellState] = None,
    *,
    rtol: float = 1e-10,
    t_end: float = 1.0,
    drift_tol: float = 1e-9,
    rhs_selector=None,
) -> ExperimentReport:
    """Inviscid total-energy conservation over a finite horizon.

    Default scenario: lam=2, theta=1, d_i=1, k=24, shells a_j = lam_j**-2.5,
    b_j = a_j/2.  The decay exponent keeps the Hall cascade contained on
    [0, 1] so the run resolves in well under a second; flatter data puts the
    front at the truncation where explicit rates exceed any feasible step.
    Pass: relative drift of sum(a^2 + b^2) stays within ``drift_tol`` at
    every sample.
    """
    if params is None:
        params = make_params(2.0, theta=1.0, nu=0.0, mu=0.0, d_i=1.0, k=24)
    if state0 is None:
        state0 = geometric_state(params.k, params.lam, 2.5, 1.0, 0.5)
    if params.nu != 0.0 or params.mu != 0.0 or params.forcing_active:
        raise ValueError("conservation experiment requires nu = mu = 0 and no forcing")
    opts = IntegratorOptions(t_end=t_end, sample_dt=t_end / 100.0, rtol=rtol, atol=1e-16, dt_init=1e-4)
    traj = integrate(state0, params, opts, rhs_selector)
    report = ExperimentReport(
        name="energy_conservation",
        params=_params_snapshot(params, rtol=rtol, t_end=t_end),
    )
    if traj.status != COMPLETED:
        report.criteria.append(
            CriterionResult(
                name="completed",
                passed=False,
                margin=None,
                basis="inviscid run must reach the horizon",
                details={"status": traj.status},
            )
        )
        return report
    budget = energy_budget(traj, params)
    drift = budget.max_drift_rel
    report.criteria.append(
        CriterionResult(
            name="energy_drift",
            passed=drift <= drift_tol,
            margin=drift_tol - drift,
            basis="inviscid total energy sum(a_j^2 + b_j^2) is a constant of motion",
            details={"max_drift_rel": drift, "n_steps": traj.n_accepted},
        )
    )
    report.details["anomaly_events"] = [e.kind for e in traj.events]
    return report


def exp_decay_bound(
    params: Optional[ModelParams] = None,
    state0: Optional[ShellState] = None,
    *,
    rtol: float = 1e-10,
    t_end: float = 1.0,
    sample_dt: float = 1e-3,
    decay_tol: float = 1e-8,
    budget_tol: float = 1e-6,
) -> ExperimentReport:
    """Dissipative runs: exponential decay bound plus the dissipation budget.

    Default scenario: nu = mu = 0.1, lam=2, theta=1, d_i=1, k=24, shells
    ``lam_j**-2`` (steep enough that the initial viscous boundary layers
    carry negligible energy relative to the trapezoid resolution).  Checks:

    * sampled energy never exceeds ``exp(-2*min(nu,mu)*t) * E(0)`` by more
      than ``decay_tol`` relative;
    * ``E(t) + 2*int(nu*|a|_1^2 + mu*|b|_1^2) - E(0)`` stays within
      ``budget_tol`` relative (trapezoid on the sample grid);
    * the two-time energy inequality holds from 0 to t_end.
    """
    if params is None:
        params = make_params(2.0, theta=1.0, nu=0.1, mu=0.1, d_i=1.0, k=24)
    if state0 is None:
        state0 = geometric_state(params.k, params.lam, 2.0, 1.0, 0.5)
    opts = IntegratorOptions(t_end=t_end, sample_dt=sample_dt, rtol=rtol, atol=1e-16, dt_init=1e-4)
    traj = integrate(state0, params, opts)
    report = ExperimentReport(
        name="decay_bound",
        params=_params_snapshot(params, rtol=rtol, t_end=t_end, sample_dt=sample_dt),
    )
    if traj.status != COMPLETED:
        report.criteria.append(
            CriterionResult(
                name="completed",
                passed=False,
                margin=None,
                basis="dissipative run must reach the horizon",
                details={"status": traj.status},
            )
        )
        return report
    budget = energy_budget(traj, params)
    worst_decay = budget.min_decay_margin_rel
    report.criteria.append(
        CriterionResult(
            name="decay_bound",
            passed=worst_decay >= -decay_tol,
            margin=worst_decay + decay_tol,
            basis="energy decays at least as fast as exp(-2*min(nu,mu)*t)",
            details={"min_margin_rel": worst_decay},
        )
    )
    worst_budget = budget.max_cumulative_rel
    report.criteria.append(
        CriterionResult(
            name="dissipation_budget",
            passed=worst_budget <= budget_tol,
            margin=budget_tol - worst_budget,
            basis="energy lost equals twice the time-integrated enstrophy dissipation",
            details={"max_cumulative_rel": worst_budget},
        )
    )
    lh = leray_hopf_check(traj, params, traj.samples[0].t, traj.samples[-1].t)
    report.criteria.append(
        CriterionResult(
            name="energy_inequality",
            passed=lh.passed,
            margin=lh.slack_rel,
            basis="two-time energy inequality with nonnegative slack",
            details={"slack_rel": lh.slack_rel},
        )
    )
    return report


def exp_h1_regimes(
    thetas: Sequence[float] = (0.8, 1.0, 1.5),
    d_i: float = 1.0,
    *,
    k: int = 12,
    amplitude: float = 0.5,
    nu: float = 0.1,
    t_split: float = 5.0,
    t_end: float = 50.0,
    rtol: float = 1e-8,
) -> ExperimentReport:
    """Long-horizon enstrophy monitoring across solution regimes.

    For parameter points in the global-strong regime the late-time enstrophy
    sup over [t_split, t_end] must not exceed the early sup over
    [0, t_split] (asserted); points in local-only or unclassified regimes
    are run identically and reported as observations.
    """
    report = ExperimentReport(
        name="h1_regimes",
        params={"thetas": list(thetas), "d_i": d_i, "k": k, "nu": nu, "t_end": t_end},
    )
    for theta in thetas:
        params = make_params(2.0, theta=theta, nu=nu, mu=nu, d_i=d_i, k=k)
        regime = classify_regime(params)
        state0 = geometric_state(k, params.lam, 1.0, amplitude, amplitude / 2.0)
        opts = IntegratorOptions(
            t_end=t_end, sample_dt=0.1, rtol=rtol, atol=1e-14, dt_init=1e-4, dt_max=1.0
        )
        traj = integrate(state0, params, opts)
        h1 = np.array([s.row.h1_a + s.row.h1_b for s in traj.samples])
        times = traj.times
        early = float(np.max(h1[times <= t_split])) if np.any(times <= t_split) else math.inf
        late = float(np.max(h1[times > t_split])) if np.any(times > t_split) else 0.0
        asserted = regime.classification == "GlobalStrong" and traj.status == COMPLETED
        ok = traj.status == COMPLETED and late <= early
        report.criteria.append(
            CriterionResult(
                name=f"h1_bounded_theta_{theta:g}",
                passed=ok if asserted else None,
                margin=(early - late) / max(early, 1e-300),
                basis=regime.basis,
                informational=not asserted,
                details={
                    "classification": regime.classification,
                    "sup_early": early,
                    "sup_late": late,
                    "status": traj.status,
                },
            )
        )
    return report


def exp_blowup(
    gamma: float = 0.05,
    lam: float = 20.0,
    theta: float = 3.5,
    nu: float = 0.01,
    mu: float = 0.01,
    *,
    k: int = 10,
    energy_factor: float = 4.0,
    data: str = "front",
    rtol: float = 1e-8,
    dt_min: float = 1e-13,
) -> ExperimentReport:
    """Large positive data in the supercritical regime: certified blow-up.

    Requires d_i = 1 (the certificate constants are derived at that value;
    other d_i need a wavenumber rescaling that is left to the caller) and a
    valid certificate.  Data carries ``E_gamma = energy_factor * M0**2``;
    the theorem speaks only for factors above 1, below that the run is
    reported as an observation.

    Pass requires (i) the Lyapunov functional to dominate the Riccati
    comparison solution at every sample while all components remain
    positive, and (ii) the trajectory to end BlowupSuspected/Overflow no
    later than 1.5 times the comparison blow-up horizon.

    At these weights (``lam_j**(theta+1)`` up to 20**45) the cascade rates
    pass float64 range as soon as amplitudes reach the upper shells, so the
    resolvable window before the integrator declares loss of solution is
    extremely short for any data profile; the report records how much of the
    trajectory was resolved.  ``data`` selects the profile: "front"
    concentrates the energy in shells 1-2 (positive tail floor), "decay"
    is ``a_j = b_j = A * lam_j**(-gamma-1)``.
    """
    consts = blowup_constants(gamma, lam, theta, nu, mu)
    report = ExperimentReport(
        name="blowup",
        params={
            "gamma": gamma,
            "lambda": lam,
            "theta": theta,
            "nu": nu,
            "mu": mu,
            "k": k,
            "energy_factor": energy_factor,
            "data": data,
        },
        details={"constants": consts.__dict__.copy()},
    )
    report.criteria.append(
        CriterionResult(
            name="certificate_valid",
            passed=consts.valid,
            margin=consts.c3,
            basis="all four coefficient conditions hold and theta > 3 + gamma",
            details={
                "cond11": consts.cond11,
                "cond12": consts.cond12,
                "cond13": consts.cond13,
                "cond14": consts.cond14,
            },
        )
    )
    if not consts.valid:
        report.criteria.append(
            CriterionResult(
                name="riccati_domination",
                passed=None,
                margin=None,
                basis="not evaluated: certificate invalid, nothing to assert",
                informational=True,
            )
        )
        return report

    e_target = energy_factor * consts.M0**2
    above_threshold = energy_factor > 1.0
    if data == "front":
        state0 = blowup_front_state(k, lam, gamma, e_target)
    elif data == "decay":
        prof = lam ** ((-gamma - 1.0) * np.arange(1, k + 1, dtype=np.float64))
        amp = math.sqrt(e_target / (2.0 * hs_norm(prof, gamma, lam) ** 2))
        state0 = ShellState(a=amp * prof, b=amp * prof)
    else:
        raise ValueError(f"unknown data profile {data!r}")

    params = make_params(lam, theta=theta, nu=nu, mu=mu, d_i=1.0, k=k)
    L0 = lyapunov_value(state0, consts)
    t_star = riccati_blowup_time(L0, consts.riccati_C)
    horizon = 1.5 * t_star
    diag = DiagnosticsSpec(gamma=gamma, c1=consts.c1, c2=consts.c2)

    def run(sample_dt: float) -> Trajectory:
        opts = IntegratorOptions(
            t_end=horizon,
            sample_dt=sample_dt,
            rtol=rtol,
            atol=1e-30,
            dt_init=1e-6,
            dt_min=dt_min,
            positivity_watch=True,
        )
        return integrate(state0, params, opts, None, diag)

    probe = run(horizon / 16.0)
    t_c = probe.samples[-1].t
    traj = run(max(t_c / 50.0, 1e-18)) if t_c > 0.0 else probe

    pos_loss = traj.first_event("PositivityLoss")
    t_positive = pos_loss.t if pos_loss is not None else math.inf
    riccati_ok = True
    worst = math.inf
    n_checked = 0
    for smp in traj.samples:
        if smp.t > t_positive:
            break
        bound = riccati_lower_bound(L0, consts.riccati_C, smp.t)
        ratio = smp.row.lyapunov / bound
        worst = min(worst, ratio)
        n_checked += 1
        if smp.row.lyapunov < bound * (1.0 - 1e-9):
            riccati_ok = False
    terminated = traj.status in (BLOWUP_SUSPECTED, OVERFLOW)
    in_time = traj.samples[-1].t <= horizon
    informational = not above_threshold

    report.criteria.append(
        CriterionResult(
            name="riccati_domination",
            passed=(riccati_ok if above_threshold else None),
            margin=worst - 1.0,
            basis="Lyapunov functional dominates the Riccati comparison curve while positive",
            informational=informational,
            details={"n_samples_checked": n_checked, "worst_ratio": worst},
        )
    )
    report.criteria.append(
        CriterionResult(
            name="finite_time_termination",
            passed=(terminated and in_time) if above_threshold else None,
            margin=horizon - traj.samples[-1].t,
            basis="trajectory ends in suspected blow-up within 1.5x the comparison horizon",
            informational=informational,
            details={"status": traj.status, "t_final": traj.samples[-1].t, "horizon": horizon},
        )
    )
    final = traj.final_state
    report.details.update(
        {
            "L0": L0,
            "t_star": t_star,
            "e_gamma_target": e_target,
            "resolved_steps": traj.n_accepted,
            "collapse_bracket": [traj.samples[-1].t, traj.samples[-1].t + dt_min],
            "positivity_loss_t": None if pos_loss is None else pos_loss.t,
            # the non-integrable quantity of the blow-up statement carries
            # exponent (theta+1)/3 + 2*gamma/3 for b in the theorem and
            # theta/3 + 2*gamma/3 in the proof's bound; report both
            "final_a_norm_third": hs_norm(final.a, theta / 3.0 + 2.0 * gamma / 3.0, lam) ** 3,
            "final_b_norm_third_theorem": hs_norm(final.b, (theta + 1.0) / 3.0 + 2.0 * gamma / 3.0, lam) ** 3,
            "final_b_norm_third_proof": hs_norm(final.b, theta / 3.0 + 2.0 * gamma / 3.0, lam) ** 3,
        }
    )
    return report


def exp_galerkin_convergence(
    k_list: Sequence[int] = (8, 12, 16),
    *,
    lam: float = 1.3,
    theta: float = 1.0,
    nu: float = 1e-4,
    amplitude: float = 2.0,
    backward_weight: float = 0.5,
    t_end: float = 1.0,
    rtol: float = 1e-12,
) -> ExperimentReport:
    """Self-convergence of truncations in the weak metric at a fixed time.

    Runs each k and 2k truncation of the same smooth profile
    ``a_j = A*lam_j**-1, b_j = A/2*lam_j**-1`` and requires the weak
    distances d_w(k-run, 2k-run) at ``t_end`` to be positive and strictly
    decreasing along ``k_list``; every run must also satisfy the two-time
    energy inequality.

    The scenario uses the general model with backward-cascade weights and a
    mild wavenumber ratio: d_w weights shells by 2**(-n*n), so a resolvable
    distance requires the truncation to backreact on the lowest shells,
    which forward-only transfer cannot do above rounding at these depths.
    The Hall channel is off (d_i = 0): its ``lam_j**(theta+1)`` rates at
    convergence-resolving depths are beyond any explicit step size.
    """
    report = ExperimentReport(
        name="galerkin_convergence",
        params={
            "k_list": list(k_list),
            "lambda": lam,
            "theta": theta,
            "nu": nu,
            "amplitude": amplitude,
            "backward_weight": backward_weight,
            "t_end": t_end,
            "rtol": rtol,
        },
    )
    delta = 5.0 - 2.0 * theta
    coeffs = GeneralCoefficients(
        delta_u=delta,
        delta_b=delta,
        beta1=backward_weight,
        beta2=backward_weight,
        beta3=backward_weight,
        beta4=backward_weight,
    )
    finals: dict[int, ShellState] = {}
    lh_all = True
    statuses = {}
    for k in sorted(set(list(k_list) + [2 * kk for kk in k_list])):
        params = make_params(lam, theta=theta, nu=nu, mu=nu, d_i=0.0, k=k)
        state0 = geometric_state(k, lam, 1.0, amplitude, amplitude / 2.0)
        opts = IntegratorOptions(
            t_end=t_end, sample_dt=t_end / 20.0, rtol=rtol, atol=1e-16, dt_init=1e-5
        )
        traj = integrate(state0, params, opts, coeffs)
        statuses[k] = traj.status
        if traj.status != COMPLETED:
            report.criteria.append(
                CriterionResult(
                    name="completed",
                    passed=False,
                    margin=None,
                    basis="every truncation must reach the horizon",
                    details={"statuses": statuses},
                )
            )
            return report
        lh_all &= leray_hopf_check(traj, params, 0.0, t_end).passed
        finals[k] = traj.final_state

    distances = [
        weak_distance(finals[kk].a, finals[2 * kk].a) + weak_distance(finals[kk].b, finals[2 * kk].b)
        for kk in k_list
    ]
    strict = all(d > 0.0 for d in distances) and all(
        distances[i] > distances[i + 1] for i in range(len(distances) - 1)
    )
    worst_ratio = min(
        (distances[i] / distances[i + 1] for i in range(len(distances) - 1)), default=math.inf
    )
    report.criteria.append(
        CriterionResult(
            name="weak_distance_decreasing",
            passed=strict,
            margin=worst_ratio - 1.0,
            basis="d_w between k and 2k truncations shrinks strictly as k grows",
            details={"distances": distances},
        )
    )
    report.criteria.append(
        CriterionResult(
            name="energy_inequality_all_runs",
            passed=lh_all,
            margin=None,
            basis="each truncation satisfies the two-time energy inequality",
        )
    )
    report.details["distances"] = distances
    return report


# --------------------------------------------------------------------------
# Parameter sweeps
# --------------------------------------------------------------------------

EXPERIMENT_AXES = ("theta", "delta", "nu", "mu", "d_i", "amplitude", "k", "seed")


@dataclass(frozen=True)
class SweepGrid:
    """Cartesian product of named parameter axes."""

    axes: dict
    cap: int = 4

    def __post_init__(self) -> None:
        if not self.axes:
            raise ValueError("sweep needs at least one axis")
        for name, values in self.axes.items():
            if name not in EXPERIMENT_AXES:
                raise ValueError(f"unknown sweep axis {name!r}; allowed: {EXPERIMENT_AXES}")
            if not len(tuple(values)):
                raise ValueError(f"axis {name!r} is empty")
        if self.cap < 1:
            raise ValueError("cap must be >= 1")

    @property
    def size(self) -> int:
        n = 1
        for values in self.axes.values():
            n *= len(tuple(values))
        return n

    def points(self) -> list[dict]:
        names = list(self.axes.keys())
        return [dict(zip(names, combo)) for combo in product(*(self.axes[n] for n in names))]


@dataclass
class SweepResult:
    grid: SweepGrid
    reports: list[tuple[dict, ExperimentReport]]

    @property
    def n_passed(self) -> int:
        return sum(1 for _, r in self.reports if r.passed)

    def summary(self) -> dict:
        rows = []
        for point, rep in sorted(self.reports, key=lambda pr: tuple(sorted(pr[0].items()))):
            rows.append(
                {
                    "point": point,
                    "experiment": rep.name,
                    "passed": rep.passed,
                    "criteria": {c.name: c.passed for c in rep.criteria},
                }
            )
        return {"size": self.grid.size, "n_passed": self.n_passed, "rows": rows}


def _sweep_worker(experiment: Callable[..., ExperimentReport], point: dict) -> ExperimentReport:
    try:
        return experiment(**point)
    except Exception as exc:  # individual failures never abort the sweep
        rep = ExperimentReport(name=getattr(experiment, "__name__", "experiment"), params=dict(point))
        rep.criteria.append(
            CriterionResult(
                name="completed",
                passed=False,
                margin=None,
                basis="experiment raised instead of reporting",
                details={"error": f"{type(exc).__name__}: {exc}"},
            )
        )
        return rep


def _regime_point_experiment(
    theta: float = 1.0,
    delta: Optional[float] = None,
    nu: float = 0.1,
    mu: Optional[float] = None,
    d_i: float = 1.0,
    amplitude: float = 0.5,
    k: int = 12,
    seed: int = 0,
    t_end: float = 5.0,
) -> ExperimentReport:
    """One grid point of the regime map: a short run plus its classification.

    Observational by design; reports the run status, the enstrophy growth
    factor and, for abnormal ends, the divergence bracket.
    """
    if delta is not None:
        theta = (5.0 - delta) / 2.0
    mu = nu if mu is None else mu
    params = make_params(2.0, theta=theta, nu=nu, mu=mu, d_i=d_i, k=k)
    regime = classify_regime(params)
    rng_amp = amplitude if seed == 0 else amplitude * (1.0 + 0.1 * (seed % 7))
    state0 = geometric_state(k, params.lam, 1.0, rng_amp, rng_amp / 2.0)
    opts = IntegratorOptions(
        t_end=t_end, sample_dt=t_end / 50.0, rtol=1e-8, atol=1e-14, dt_init=1e-4, dt_max=1.0
    )
    traj = integrate(state0, params, opts)
    h1 = np.array([s.row.h1_a + s.row.h1_b for s in traj.samples])
    rep = ExperimentReport(
        name="regime_point",
        params=_params_snapshot(params, amplitude=rng_amp, seed=seed, t_end=t_end),
    )
    rep.criteria.append(
        CriterionResult(
            name="observed",
            passed=True,
            margin=None,
            basis=regime.basis,
            informational=True,
            details={
                "classification": regime.classification,
                "status": traj.status,
                "h1_growth": float(h1.max() / max(h1[0], 1e-300)),
                "t_final": traj.samples[-1].t,
            },
        )
    )
    return rep


EXPERIMENTS: dict[str, Callable[..., ExperimentReport]] = {
    "energy_conservation": exp_energy_conservation,
    "decay_bound": exp_decay_bound,
    "h1_regimes": exp_h1_regimes,
    "blowup": exp_blowup,
    "galerkin_convergence": exp_galerkin_convergence,
    "regime_point": _regime_point_experiment,
}


def sweep_run(grid: SweepGrid, experiment) -> SweepResult:
    """Run an experiment on every grid point (concurrently up to a cap).

    ``experiment`` is a name from :data:`EXPERIMENTS` or a callable taking
    axis values as keywords.  Individual failures are recorded as failed
    reports.  The result is aggregated in a deterministic order regardless
    of scheduling; DYADIC_THREADS caps the worker count.
    """
    if isinstance(experiment, str):
        if experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {experiment!r}; known: {sorted(EXPERIMENTS)}")
        fn = EXPERIMENTS[experiment]
    else:
        fn = experiment
    points = grid.points()
    cap = grid.cap
    env_cap = os.environ.get("DYADIC_THREADS")
    if env_cap:
        cap = max(1, min(cap, int(env_cap)))
    if cap == 1 or len(points) == 1:
        reports = [(p, _sweep_worker(fn, p)) for p in points]
    else:
        with ThreadPoolExecutor(max_workers=cap) as pool:
            futures = [pool.submit(_sweep_worker, fn, p) for p in points]
            reports = [(p, f.result()) for p, f in zip(points, futures)]
    return SweepResult(grid=grid, reports=reports)
