"""Adaptive stiffness-aware time stepping for shell states.

The diffusion ``-nu*lam_j**2`` / ``-mu*lam_j**2`` is diagonal and huge at the
top shells, so a fully explicit method would be step-size-bound by
``lam_k**2``.  Each step therefore applies the linear decay exactly through
integrating factors ``exp(-nu*lam_j**2*dt)`` and advances the nonlinear
remainder with an embedded explicit Dormand-Prince 5(4) pair evaluated in
the transformed (Lawson) variables.  All stage exponentials decay, so the
scheme is overflow-safe and exact on purely linear flow for any step size.

Abnormal ends never raise; they are reported through the trajectory status:

* ``Overflow``          a stage or step produced non-finite values;
* ``BlowupSuspected``   the controller needs steps below ``dt_min`` while the
                        local error stays above tolerance, or the state
                        magnitude passed ``overflow_guard``;
* ``StepCollapse``      the step size degenerated until time stopped
                        advancing (``t + dt == t`` in floating point).

Blow-up is only ever "suspected": the truncated system cannot actually leave
bounded energy, what diverges are the nonlinear rates, and the report
carries the time bracket ``[last accepted t, collapse t]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .diagnostics import hs_norm, lyapunov_cross_sum
from .model import (
    GeneralCoefficients,
    ModelParams,
    RhsKernel,
    ShellState,
    make_rhs,
    shell_wavenumbers,
)

__all__ = [
    "IntegratorOptions",
    "DiagnosticsSpec",
    "DiagnosticsRow",
    "Sample",
    "EventRecord",
    "Trajectory",
    "step",
    "integrate",
    "COMPLETED",
    "BLOWUP_SUSPECTED",
    "OVERFLOW",
    "STEP_COLLAPSE",
    "EVENT_POSITIVITY_LOSS",
    "EVENT_BLOWUP_SUSPECTED",
    "EVENT_OVERFLOW",
    "EVENT_STEP_COLLAPSE",
    "EVENT_ENERGY_ANOMALY",
]

COMPLETED = "Completed"
BLOWUP_SUSPECTED = "BlowupSuspected"
OVERFLOW = "Overflow"
STEP_COLLAPSE = "StepCollapse"

EVENT_POSITIVITY_LOSS = "PositivityLoss"
EVENT_BLOWUP_SUSPECTED = "BlowupSuspected"
EVENT_OVERFLOW = "Overflow"
EVENT_STEP_COLLAPSE = "StepCollapse"
EVENT_ENERGY_ANOMALY = "EnergyAnomaly"

# Dormand-Prince 5(4).  Row 7 equals the 5th-order weights (FSAL); _ERR is
# the difference between the 5th- and 4th-order weights.
_C = (0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0)
_A = (
    (),
    (1.0 / 5.0,),
    (3.0 / 40.0, 9.0 / 40.0),
    (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
    (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
    (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0),
    (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0),
)
_ERR = (
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
)
_ORDER = 5
_SAFETY = 0.9
_SHRINK = 0.2
_GROW = 5.0

# Distinct integrating-factor spans (multiples of h) used by stages, output
# and error weights; one vectorized exp over all of them per step.
_SPAN_VALUES: tuple[float, ...]
_STAGE_PLAN: tuple  # per stage: (c_span_index, ((j, a_ij, span_index), ...))
_ERR_PLAN: tuple  # ((j, err_j, span_index), ...)


def _build_plans():
    spans: list[float] = []

    def idx(s: float) -> int:
        if s == 0.0:
            return -1
        if s not in spans:
            spans.append(s)
        return spans.index(s)

    stage_plan = []
    for i in range(1, 7):
        terms = tuple(
            (j, aij, idx(_C[i] - _C[j])) for j, aij in enumerate(_A[i]) if aij != 0.0
        )
        stage_plan.append((idx(_C[i]), terms))
    err_plan = tuple((j, ej, idx(1.0 - _C[j])) for j, ej in enumerate(_ERR) if ej != 0.0)
    return tuple(spans), tuple(stage_plan), err_plan


_SPAN_VALUES, _STAGE_PLAN, _ERR_PLAN = _build_plans()
_SPAN_ARRAY = np.array(_SPAN_VALUES)


@dataclass(frozen=True)
class IntegratorOptions:
    """Tolerances, step bounds, horizon and watchdog settings."""

    t_end: float
    sample_dt: float
    rtol: float = 1e-8
    atol: float = 1e-12
    dt_init: float = 1e-3
    dt_min: float = 1e-13
    dt_max: float = math.inf
    positivity_watch: bool = False
    overflow_guard: float = 1e150

    def __post_init__(self) -> None:
        if not (self.rtol > 0.0 and self.atol > 0.0):
            raise ValueError("rtol and atol must be positive")
        if not (0.0 < self.dt_min <= self.dt_init <= self.dt_max):
            raise ValueError(
                f"need 0 < dt_min <= dt_init <= dt_max, got "
                f"({self.dt_min}, {self.dt_init}, {self.dt_max})"
            )
        if self.sample_dt <= 0.0:
            raise ValueError("sample_dt must be positive")
        if self.t_end < 0.0:
            raise ValueError("t_end must be >= 0")
        if self.overflow_guard <= 0.0:
            raise ValueError("overflow_guard must be positive")


@dataclass(frozen=True)
class DiagnosticsSpec:
    """Weights for the per-sample diagnostics row.

    ``gamma`` selects the weighted-energy column; ``c1``/``c2`` add the
    Lyapunov cross terms (zero means the Lyapunov column repeats E_gamma).
    """

    gamma: float = 0.0
    c1: float = 0.0
    c2: float = 0.0


@dataclass(frozen=True)
class DiagnosticsRow:
    dt: float
    e_total: float
    e_a: float
    e_b: float
    h1_a: float
    h1_b: float
    e_gamma: float
    lyapunov: float
    min_a: float
    min_b: float


@dataclass(frozen=True)
class Sample:
    t: float
    state: ShellState
    row: DiagnosticsRow


@dataclass(frozen=True)
class EventRecord:
    kind: str
    t: float
    detail: dict


@dataclass
class Trajectory:
    samples: list[Sample] = field(default_factory=list)
    events: list[EventRecord] = field(default_factory=list)
    status: str = COMPLETED
    n_accepted: int = 0
    n_rejected: int = 0

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    @property
    def final_state(self) -> ShellState:
        return self.samples[-1].state

    def first_event(self, kind: str) -> Optional[EventRecord]:
        for ev in self.events:
            if ev.kind == kind:
                return ev
        return None


RhsSelector = Union[None, GeneralCoefficients, RhsKernel]


def _nonlinear_kernel(params: ModelParams, rhs_selector: RhsSelector) -> RhsKernel:
    if rhs_selector is None:
        return make_rhs(params, include_dissipation=False)
    if isinstance(rhs_selector, GeneralCoefficients):
        return make_rhs(params, rhs_selector, include_dissipation=False)
    if callable(rhs_selector):
        return rhs_selector
    raise TypeError(f"rhs_selector must be None, GeneralCoefficients or callable, got {rhs_selector!r}")


def _make_workspace(params: ModelParams, rhs_selector: RhsSelector) -> _LawsonWorkspace:
    kernel = _nonlinear_kernel(params, rhs_selector)
    lam2 = shell_wavenumbers(params.lam, 2.0, params.k + 1)[1:]
    decay = np.concatenate((params.nu * lam2, params.mu * lam2))
    return _LawsonWorkspace(kernel, params.k, decay)


class _LawsonWorkspace:
    """Preallocated buffers for repeated flat-state steps of one system."""

    def __init__(self, kernel: RhsKernel, k: int, decay: np.ndarray):
        self.kernel = kernel
        self.k = k
        self.decay = decay  # length 2k: (nu*lam_j**2, mu*lam_j**2)
        self.dissipative = bool(np.any(decay != 0.0))
        m = 2 * k
        self.y_stage = np.empty(m)
        self.scratch = np.empty(m)
        self.err = np.empty(m)

    def rhs_flat(self, y: np.ndarray) -> np.ndarray:
        da, db = self.kernel(y[: self.k], y[self.k :])
        return np.concatenate((da, db))


class _StepData:
    """One Lawson-DOPRI5 step plus what dense evaluation needs."""

    __slots__ = ("y0", "y1", "n0", "n1", "t", "h", "enorm")

    def __init__(self, y0, y1, n0, n1, t, h, enorm):
        self.y0, self.y1, self.n0, self.n1 = y0, y1, n0, n1
        self.t, self.h, self.enorm = t, h, enorm


def _lawson_step(
    ws: _LawsonWorkspace,
    y0: np.ndarray,
    t: float,
    h: float,
    rtol: float,
    atol: float,
    n0: np.ndarray,
) -> Optional[_StepData]:
    """One embedded step; returns None when any stage goes non-finite.

    ``n0`` is the nonlinear slope at ``y0`` (first-same-as-last reuse); the
    caller is responsible for its finiteness.
    """
    exps = np.exp(np.multiply.outer(_SPAN_ARRAY * (-h), ws.decay)) if ws.dissipative else None
    n = [None] * 7
    n[0] = n0
    y = ws.y_stage
    u = ws.scratch
    for i, (c_idx, terms) in enumerate(_STAGE_PLAN, start=1):
        if exps is None or c_idx < 0:
            np.copyto(y, y0)
        else:
            np.multiply(exps[c_idx], y0, out=y)
        for j, aij, s_idx in terms:
            if exps is None or s_idx < 0:
                np.multiply(n[j], h * aij, out=u)
            else:
                np.multiply(exps[s_idx], n[j], out=u)
                u *= h * aij
            y += u
        if not np.isfinite(y).all():
            return None
        n[i] = ws.rhs_flat(y)
        if not np.isfinite(n[i]).all():
            return None
    y1 = y.copy()  # stage 7 abscissa is the 5th-order solution (FSAL)
    n1 = n[6]

    err = ws.err
    err[:] = 0.0
    for j, ej, s_idx in _ERR_PLAN:
        if exps is None or s_idx < 0:
            np.multiply(n[j], h * ej, out=u)
        else:
            np.multiply(exps[s_idx], n[j], out=u)
            u *= h * ej
        err += u
    np.abs(y0, out=u)
    sc = np.abs(y1)
    np.maximum(sc, u, out=sc)
    sc *= rtol
    sc += atol
    np.divide(err, sc, out=u)
    enorm = math.sqrt(float(np.dot(u, u)) / u.size)
    if not math.isfinite(enorm):
        return None
    return _StepData(y0, y1, n0, n1, t, h, enorm)


def _dense_eval(sd: _StepData, sigma: float, decay: np.ndarray, dissipative: bool) -> np.ndarray:
    """State inside an accepted step: exact linear decay of the left endpoint
    plus a cubic Hermite through the nonlinear remainder.

    The remainder R(sigma) = y(sigma) - exp(-decay*sigma*h)*y0 vanishes with
    the nonlinearity, which keeps sampled values exact on purely linear flow.
    All exponentials decay (the pair's native continuous extension would
    need growing factors exp(+nu*lam**2*...) here and overflow).
    """
    h = sd.h
    h10 = sigma * (1.0 - sigma) ** 2
    h01 = sigma * sigma * (3.0 - 2.0 * sigma)
    h11 = sigma * sigma * (sigma - 1.0)
    if dissipative:
        e_1 = np.exp(decay * (-h))
        r1 = sd.y1 - e_1 * sd.y0
        p1 = h * (-decay * r1 + sd.n1)
        base = np.exp(decay * (-sigma * h)) * sd.y0
    else:
        r1 = sd.y1 - sd.y0
        p1 = h * sd.n1
        base = sd.y0
    p0 = h * sd.n0
    return base + h10 * p0 + h01 * r1 + h11 * p1


def step(
    state: ShellState,
    dt: float,
    params: ModelParams,
    rhs_selector: RhsSelector = None,
    *,
    rtol: float = 1e-8,
    atol: float = 1e-12,
) -> tuple[ShellState, float]:
    """Advance one integrating-factor step of size ``dt``.

    Returns the new state and the weighted local-error estimate of the
    embedded pair (below 1.0 means the step meets ``atol + rtol*|y|``).
    Raises :class:`OverflowError` when a stage leaves floating-point range.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if state.k != params.k:
        raise ValueError(f"state has {state.k} shells but params expect {params.k}")
    ws = _make_workspace(params, rhs_selector)
    y0 = np.concatenate((state.a, state.b))
    n0 = ws.rhs_flat(y0)
    if not np.isfinite(n0).all():
        raise OverflowError("right-hand side is non-finite at the initial state")
    sd = _lawson_step(ws, y0, state.t, dt, rtol, atol, n0)
    if sd is None:
        raise OverflowError("step produced non-finite values (dt too large for the nonlinearity)")
    k = params.k
    return ShellState(a=sd.y1[:k], b=sd.y1[k:], t=state.t + dt), sd.enorm


def _diag_row(
    a: np.ndarray,
    b: np.ndarray,
    dt: float,
    params: ModelParams,
    diag: DiagnosticsSpec,
) -> DiagnosticsRow:
    lam = params.lam
    e_a = float(np.dot(a, a))
    e_b = float(np.dot(b, b))
    h1_a = hs_norm(a, 1.0, lam) ** 2
    h1_b = hs_norm(b, 1.0, lam) ** 2
    e_gamma = hs_norm(a, diag.gamma, lam) ** 2 + hs_norm(b, diag.gamma, lam) ** 2
    lyap = e_gamma
    if diag.c1 != 0.0:
        lyap += diag.c1 * lyapunov_cross_sum(a, diag.gamma, lam)
    if diag.c2 != 0.0:
        lyap += diag.c2 * lyapunov_cross_sum(b, diag.gamma, lam)
    return DiagnosticsRow(
        dt=dt,
        e_total=e_a + e_b,
        e_a=e_a,
        e_b=e_b,
        h1_a=h1_a,
        h1_b=h1_b,
        e_gamma=e_gamma,
        lyapunov=lyap,
        min_a=float(np.min(a)),
        min_b=float(np.min(b)),
    )


def integrate(
    state0: ShellState,
    params: ModelParams,
    opts: IntegratorOptions,
    rhs_selector: RhsSelector = None,
    diag: DiagnosticsSpec = DiagnosticsSpec(),
) -> Trajectory:
    """Integrate from ``state0.t`` to ``state0.t + opts.t_end``.

    Samples are emitted on the ``sample_dt`` grid through dense evaluation of
    accepted steps (sampling never constrains the step size), plus the final
    state.  Events (positivity loss, energy anomaly) are recorded without
    stopping; overflow, step collapse and suspected blow-up are terminal and
    set the trajectory status.  The run is bitwise deterministic.
    """
    if state0.k != params.k:
        raise ValueError(f"state has {state0.k} shells but params expect {params.k}")
    k = params.k
    ws = _make_workspace(params, rhs_selector)

    t0 = state0.t
    t_final = t0 + opts.t_end
    traj = Trajectory()
    y = np.concatenate((state0.a, state0.b))
    t = t0

    def emit(ts: float, yy: np.ndarray, dt_here: float) -> None:
        if traj.samples and ts <= traj.samples[-1].t + 1e-12 * max(1.0, abs(ts)):
            return
        traj.samples.append(
            Sample(
                t=ts,
                state=ShellState(a=yy[:k], b=yy[k:], t=ts),
                row=_diag_row(yy[:k], yy[k:], dt_here, params, diag),
            )
        )

    emit(t0, y, 0.0)
    if opts.t_end == 0.0:
        return traj

    watch_positivity = opts.positivity_watch
    check_energy = not params.forcing_active
    e0 = float(np.dot(y, y))
    e_floor = e0
    sample_index = 1
    next_sample = t0 + opts.sample_dt

    h = min(opts.dt_init, opts.t_end)
    n_cached: Optional[np.ndarray] = None
    status = COMPLETED

    while True:
        time_eps = 1e-12 * max(1.0, abs(t))
        if t_final - t <= time_eps:
            break
        if t + h > t_final:
            h = t_final - t  # final step may undershoot dt_min to land exactly
        if t + h <= t:
            traj.events.append(
                EventRecord(kind=EVENT_STEP_COLLAPSE, t=t, detail={"dt": h, "reason": "time stagnation"})
            )
            status = STEP_COLLAPSE
            break
        if n_cached is None:
            n_cached = ws.rhs_flat(y)
            if not np.isfinite(n_cached).all():
                traj.events.append(
                    EventRecord(kind=EVENT_OVERFLOW, t=t, detail={"reason": "non-finite right-hand side"})
                )
                status = OVERFLOW
                break
        sd = _lawson_step(ws, y, t, h, opts.rtol, opts.atol, n_cached)
        if sd is None:
            # a trial stage left floating-point range: reject and shrink
            traj.n_rejected += 1
            if h <= opts.dt_min * (1.0 + 1e-12):
                traj.events.append(
                    EventRecord(kind=EVENT_OVERFLOW, t=t, detail={"dt": h, "reason": "non-finite at dt_min"})
                )
                status = OVERFLOW
                break
            h = max(h * _SHRINK, opts.dt_min)
            continue
        if sd.enorm <= 1.0:
            t_new = t + h
            # dense samples inside the accepted interval
            while next_sample <= t_new + time_eps:
                sigma = min(max((next_sample - t) / h, 0.0), 1.0)
                ys = _dense_eval(sd, sigma, ws.decay, ws.dissipative)
                emit(t0 + sample_index * opts.sample_dt, ys, h)
                sample_index += 1
                next_sample = t0 + sample_index * opts.sample_dt
            y = sd.y1
            t = t_new
            n_cached = sd.n1
            traj.n_accepted += 1

            if watch_positivity:
                mn = float(np.min(y))
                if mn < 0.0:
                    i_min = int(np.argmin(y))
                    traj.events.append(
                        EventRecord(
                            kind=EVENT_POSITIVITY_LOSS,
                            t=t,
                            detail={
                                "field": "a" if i_min < k else "b",
                                "shell": (i_min % k) + 1,
                                "value": mn,
                            },
                        )
                    )
                    watch_positivity = False
            if check_energy:
                e_now = float(np.dot(y, y))
                if e_now > e_floor + 10.0 * opts.rtol * (t - t0) * max(e0, 1e-300):
                    traj.events.append(
                        EventRecord(
                            kind=EVENT_ENERGY_ANOMALY,
                            t=t,
                            detail={"energy": e_now, "floor": e_floor},
                        )
                    )
                    check_energy = False
                e_floor = min(e_floor, e_now)
            peak = float(np.max(np.abs(y)))
            if peak > opts.overflow_guard:
                traj.events.append(
                    EventRecord(kind=EVENT_BLOWUP_SUSPECTED, t=t, detail={"magnitude": peak})
                )
                status = BLOWUP_SUSPECTED
                break
            factor = _GROW if sd.enorm == 0.0 else min(_GROW, max(_SHRINK, _SAFETY * sd.enorm ** (-1.0 / _ORDER)))
            h = min(h * factor, opts.dt_max)
        else:
            traj.n_rejected += 1
            factor = max(_SHRINK, _SAFETY * sd.enorm ** (-1.0 / _ORDER))
            h_new = h * factor
            if h_new < opts.dt_min:
                if h <= opts.dt_min:
                    traj.events.append(
                        EventRecord(
                            kind=EVENT_BLOWUP_SUSPECTED,
                            t=t,
                            detail={"dt": h, "error_ratio": sd.enorm, "bracket": [t, t + h]},
                        )
                    )
                    status = BLOWUP_SUSPECTED
                    break
                h = opts.dt_min
            else:
                h = h_new

    emit(t, y, h)
    traj.status = status
    return traj
