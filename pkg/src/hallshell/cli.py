"""Configuration parsing, command dispatch and trajectory serialization.

A run is described by one JSON document with ``model``, ``data``,
``integrator``, ``blowup`` and ``output`` sections (plus ``sweep`` for grid
runs).  Parsing is strict: unknown keys anywhere are rejected with their
path, and exactly one of ``model.theta`` / ``model.delta`` must be present.
Time series go to CSV with a fixed column schema; events and reports go to
JSON next to it.  All floating-point fields are printed as shortest
round-trip decimals, so re-serializing a parsed file is byte-identical.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .diagnostics import blowup_constants, energy_budget, energy_law_residual, flux_scale, leray_hopf_check
from .experiments import (
    EXPERIMENTS,
    SweepGrid,
    blowup_front_state,
    geometric_state,
    random_positive_state,
    single_shell_state,
    sweep_run,
)
from .integrator import DiagnosticsSpec, IntegratorOptions, Trajectory, integrate
from .model import (
    GeneralCoefficients,
    ModelParams,
    ShellState,
    classify_regime,
    forward_cascade_coefficients,
    make_params,
    rhs_galerkin,
    rhs_general,
)

__all__ = ["ConfigError", "RunConfig", "parse_config", "config_to_json", "write_timeseries", "main"]

CSV_HEADER = "t,dt,E_total,E_a,E_b,H1_a,H1_b,E_gamma,L,min_a,min_b,status"


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key path."""


def _fmt(x: float) -> str:
    return repr(float(x))


@dataclass(frozen=True)
class ModelSection:
    lam: float = 2.0
    theta: Optional[float] = None
    delta: Optional[float] = None
    nu: float = 0.0
    mu: float = 0.0
    d_i: float = 0.0
    k: int = 16
    coefficients: Optional[dict] = None
    forcing: Optional[list] = None


@dataclass(frozen=True)
class DataSection:
    generator: str = "geometric"
    amplitude: float = 1.0
    amplitude_b: Optional[float] = None
    decay: float = 1.0
    shell: int = 1
    seed: int = 0
    e_gamma: Optional[float] = None


@dataclass(frozen=True)
class IntegratorSection:
    rtol: float = 1e-8
    atol: float = 1e-12
    t_end: float = 1.0
    sample_dt: float = 0.01
    dt_init: float = 1e-4
    dt_min: float = 1e-13
    dt_max: float = math.inf
    positivity_watch: bool = False
    overflow_guard: float = 1e150


@dataclass(frozen=True)
class BlowupSection:
    gamma: float = 0.0


@dataclass(frozen=True)
class OutputSection:
    directory: str = "out"
    formats: tuple = ("csv", "json")


@dataclass(frozen=True)
class SweepSection:
    experiment: str = "regime_point"
    axes: dict = field(default_factory=dict)
    cap: int = 4


@dataclass(frozen=True)
class RunConfig:
    model: ModelSection = ModelSection()
    data: DataSection = DataSection()
    integrator: IntegratorSection = IntegratorSection()
    blowup: BlowupSection = BlowupSection()
    output: OutputSection = OutputSection()
    sweep: Optional[SweepSection] = None


_SECTION_KEYS = {
    "model": {
        "lambda": "lam",
        "theta": "theta",
        "delta": "delta",
        "nu": "nu",
        "mu": "mu",
        "d_i": "d_i",
        "k": "k",
        "coefficients": "coefficients",
        "forcing": "forcing",
    },
    "data": {
        "generator": "generator",
        "amplitude": "amplitude",
        "amplitude_b": "amplitude_b",
        "decay": "decay",
        "shell": "shell",
        "seed": "seed",
        "e_gamma": "e_gamma",
    },
    "integrator": {
        "rtol": "rtol",
        "atol": "atol",
        "t_end": "t_end",
        "sample_dt": "sample_dt",
        "dt_init": "dt_init",
        "dt_min": "dt_min",
        "dt_max": "dt_max",
        "positivity_watch": "positivity_watch",
        "overflow_guard": "overflow_guard",
    },
    "blowup": {"gamma": "gamma"},
    "output": {"directory": "directory", "formats": "formats"},
    "sweep": {"experiment": "experiment", "axes": "axes", "cap": "cap"},
}
_COEFF_KEYS = {
    "alpha1",
    "alpha2",
    "alpha3",
    "alpha4",
    "beta1",
    "beta2",
    "beta3",
    "beta4",
    "zeta",
    "delta_u",
    "delta_b",
    "beta3_forward_velocity",
}
_SECTION_TYPES = {
    "model": ModelSection,
    "data": DataSection,
    "integrator": IntegratorSection,
    "blowup": BlowupSection,
    "output": OutputSection,
    "sweep": SweepSection,
}


def _build_section(name: str, raw: dict):
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected an object")
    keymap = _SECTION_KEYS[name]
    kwargs = {}
    for key, value in raw.items():
        if key not in keymap:
            raise ConfigError(f"{name}.{key}: unknown key")
        kwargs[keymap[key]] = value
    if name == "model" and kwargs.get("coefficients") is not None:
        for ck in kwargs["coefficients"]:
            if ck not in _COEFF_KEYS:
                raise ConfigError(f"model.coefficients.{ck}: unknown key")
    if name == "output" and "formats" in kwargs:
        kwargs["formats"] = tuple(kwargs["formats"])
    try:
        return _SECTION_TYPES[name](**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON configuration document."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected an object")
    sections = {}
    for key, value in raw.items():
        if key not in _SECTION_KEYS:
            raise ConfigError(f"{key}: unknown section")
        sections[key] = _build_section(key, value)
    cfg = RunConfig(**sections)
    has_theta = cfg.model.theta is not None
    has_delta = cfg.model.delta is not None
    if has_theta == has_delta:
        raise ConfigError("model: exactly one of theta/delta must be present")
    build_params(cfg)  # surface semantic errors (ranges, forcing shape) now
    return cfg


def config_to_json(cfg: RunConfig) -> str:
    """Serialize a config; parse(config_to_json(parse(text))) is the identity."""
    doc: dict = {}
    for name, keymap in _SECTION_KEYS.items():
        section = getattr(cfg, name)
        if section is None:
            continue
        entries = {}
        for json_key, attr in keymap.items():
            value = getattr(section, attr)
            if value is None:
                continue
            if isinstance(value, tuple):
                value = list(value)
            if isinstance(value, float) and math.isinf(value):
                continue  # dt_max default; JSON has no Infinity in strict mode
            entries[json_key] = value
        if name == "sweep":
            doc[name] = entries
        elif entries or name in ("model", "data", "integrator"):
            doc[name] = entries
    if cfg.sweep is None:
        doc.pop("sweep", None)
    return json.dumps(doc, indent=2, sort_keys=True)


def build_params(cfg: RunConfig) -> ModelParams:
    m = cfg.model
    try:
        return make_params(
            m.lam,
            theta=m.theta,
            delta=m.delta,
            nu=m.nu,
            mu=m.mu,
            d_i=m.d_i,
            k=m.k,
            forcing_b=None if m.forcing is None else np.asarray(m.forcing, dtype=float),
        )
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from exc


def build_coefficients(cfg: RunConfig, params: ModelParams) -> Optional[GeneralCoefficients]:
    if cfg.model.coefficients is None:
        return None
    raw = dict(cfg.model.coefficients)
    raw.setdefault("delta_u", params.delta)
    raw.setdefault("delta_b", params.delta)
    try:
        return GeneralCoefficients(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model.coefficients: {exc}") from exc


def build_state(cfg: RunConfig, params: ModelParams) -> ShellState:
    d = cfg.data
    gamma = cfg.blowup.gamma
    try:
        if d.generator == "geometric":
            return geometric_state(params.k, params.lam, d.decay, d.amplitude, d.amplitude_b)
        if d.generator == "single_shell":
            return single_shell_state(params.k, d.shell, d.amplitude, d.amplitude_b)
        if d.generator == "random_positive":
            if d.e_gamma is None:
                raise ConfigError("data.e_gamma: required for random_positive")
            return random_positive_state(params.k, params.lam, gamma, d.e_gamma, d.seed)
        if d.generator == "blowup_front":
            if d.e_gamma is None:
                raise ConfigError("data.e_gamma: required for blowup_front")
            return blowup_front_state(params.k, params.lam, gamma, d.e_gamma)
    except ValueError as exc:
        raise ConfigError(f"data: {exc}") from exc
    raise ConfigError(f"data.generator: unknown generator {d.generator!r}")


def build_options(cfg: RunConfig) -> IntegratorOptions:
    i = cfg.integrator
    try:
        return IntegratorOptions(
            t_end=i.t_end,
            sample_dt=i.sample_dt,
            rtol=i.rtol,
            atol=i.atol,
            dt_init=i.dt_init,
            dt_min=i.dt_min,
            dt_max=i.dt_max,
            positivity_watch=i.positivity_watch,
            overflow_guard=i.overflow_guard,
        )
    except ValueError as exc:
        raise ConfigError(f"integrator: {exc}") from exc


def build_diagnostics(cfg: RunConfig, params: ModelParams) -> DiagnosticsSpec:
    gamma = cfg.blowup.gamma
    if gamma > 0.0 and params.theta > 3.0 + gamma:
        consts = blowup_constants(gamma, params.lam, params.theta, params.nu, params.mu)
        if consts.valid:
            return DiagnosticsSpec(gamma=gamma, c1=consts.c1, c2=consts.c2)
    return DiagnosticsSpec(gamma=gamma)


def write_timeseries(traj: Trajectory, path) -> Path:
    """Write samples as CSV (fixed schema) and events as a sibling JSON file.

    For ``runs/x.csv`` the events go to ``runs/x.events.json``.  Numeric
    fields use shortest round-trip decimals.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [CSV_HEADER]
    for s in traj.samples:
        r = s.row
        fields = [
            _fmt(s.t),
            _fmt(r.dt),
            _fmt(r.e_total),
            _fmt(r.e_a),
            _fmt(r.e_b),
            _fmt(r.h1_a),
            _fmt(r.h1_b),
            _fmt(r.e_gamma),
            _fmt(r.lyapunov),
            _fmt(r.min_a),
            _fmt(r.min_b),
            traj.status,
        ]
        lines.append(",".join(fields))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    events_path = path.with_suffix(".events.json") if path.suffix else path.with_name(path.name + ".events.json")
    events_doc = {
        "status": traj.status,
        "n_accepted": traj.n_accepted,
        "n_rejected": traj.n_rejected,
        "events": [{"kind": e.kind, "t": e.t, "detail": e.detail} for e in traj.events],
    }
    events_path.write_text(json.dumps(events_doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _write_json(doc, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float):
        return obj
    if hasattr(obj, "__dict__"):
        return obj.__dict__
    return str(obj)


def _report_doc(report) -> dict:
    return {
        "name": report.name,
        "params": report.params,
        "passed": report.passed,
        "criteria": [
            {
                "name": c.name,
                "passed": c.passed,
                "margin": c.margin,
                "basis": c.basis,
                "informational": c.informational,
                "details": c.details,
            }
            for c in report.criteria
        ],
        "details": report.details,
        "artifacts": report.artifacts,
    }


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def _cmd_simulate(args) -> int:
    cfg = parse_config(Path(args.config).read_text(encoding="utf-8"))
    params = build_params(cfg)
    coeffs = build_coefficients(cfg, params)
    state0 = build_state(cfg, params)
    opts = build_options(cfg)
    diag = build_diagnostics(cfg, params)
    regime = classify_regime(params)
    print(f"regime: {regime.classification} ({regime.basis})")
    traj = integrate(state0, params, opts, coeffs, diag)
    out_dir = Path(args.out or cfg.output.directory)
    csv_path = write_timeseries(traj, out_dir / "timeseries.csv")
    summary = {
        "status": traj.status,
        "regime": regime.classification,
        "t_final": traj.samples[-1].t,
        "n_samples": len(traj.samples),
        "n_accepted": traj.n_accepted,
        "n_rejected": traj.n_rejected,
        "final_energy": traj.samples[-1].row.e_total,
    }
    if "json" in cfg.output.formats:
        _write_json(summary, out_dir / "summary.json")
    print(f"status: {traj.status}  samples: {len(traj.samples)}  wrote {csv_path}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = parse_config(Path(args.config).read_text(encoding="utf-8"))
    if cfg.sweep is None:
        raise ConfigError("sweep: section required for the sweep command")
    grid = SweepGrid(axes=dict(cfg.sweep.axes), cap=cfg.sweep.cap)
    print(f"sweep: {grid.size} points over {sorted(grid.axes)} (cap {grid.cap})")
    result = sweep_run(grid, cfg.sweep.experiment)
    out_dir = Path(args.out or cfg.output.directory)
    _write_json(result.summary(), out_dir / "sweep_summary.json")
    for i, (point, report) in enumerate(result.reports):
        _write_json(_report_doc(report), out_dir / f"point_{i:04d}" / "report.json")
    failed = [p for p, r in result.reports if not r.passed]
    print(f"passed {result.n_passed}/{len(result.reports)} grid points")
    return 1 if failed else 0


def _cmd_constants(args) -> int:
    consts = blowup_constants(args.gamma, args.lam, args.theta, args.nu, args.mu)
    print(json.dumps(consts.__dict__, indent=2, sort_keys=True, default=_json_default))
    return 0


def _cmd_regime(args) -> int:
    params = make_params(2.0, theta=args.theta, nu=0.0, mu=0.0, d_i=args.d_i, k=1)
    regime = classify_regime(params)
    print(f"{regime.classification}: {regime.basis}")
    return 0


def _cmd_verify(args) -> int:
    """Invariant suite on a short trajectory of the configured system."""
    cfg = parse_config(Path(args.config).read_text(encoding="utf-8"))
    params = build_params(cfg)
    coeffs = build_coefficients(cfg, params)
    state0 = build_state(cfg, params)
    results: list[tuple[str, bool, str]] = []

    # pointwise energy-law residual of the right-hand side at the data
    deriv = rhs_galerkin(state0, params) if coeffs is None else rhs_general(state0, params, coeffs)
    residual = energy_law_residual(state0, deriv, params)
    scale = flux_scale(state0, params)
    ok = abs(residual) <= 1e-12 * max(scale, 1e-300)
    results.append(("flux_cancellation", ok, f"residual {residual:.3e} vs scale {scale:.3e}"))

    # reduction agreement of the two evaluators at the forward-cascade point
    reduction = forward_cascade_coefficients(params)
    dg = rhs_galerkin(state0, params)
    dn = rhs_general(state0, params, reduction)
    ok = bool(np.array_equal(dg.da, dn.da) and np.array_equal(dg.db, dn.db))
    results.append(("reduction_equivalence", ok, "bit-identical right-hand sides"))

    # short run: budget, decay bound and two-time inequality
    horizon = min(cfg.integrator.t_end, 0.5)
    opts = IntegratorOptions(
        t_end=horizon,
        sample_dt=horizon / 100.0,
        rtol=1e-10,
        atol=1e-16,
        dt_init=min(cfg.integrator.dt_init, horizon),
        dt_min=cfg.integrator.dt_min,
    )
    traj = integrate(state0, params, opts, coeffs)
    if traj.status == "Completed" and not params.forcing_active:
        budget = energy_budget(traj, params)
        ok = budget.max_cumulative_rel <= 1e-6
        results.append(("dissipation_budget", ok, f"cumulative residual {budget.max_cumulative_rel:.3e}"))
        ok = budget.min_decay_margin_rel >= -1e-8
        results.append(("decay_bound", ok, f"min margin {budget.min_decay_margin_rel:.3e}"))
        lh = leray_hopf_check(traj, params, 0.0, horizon)
        results.append(("energy_inequality", lh.passed, f"slack {lh.slack_rel:.3e}"))
    else:
        results.append(
            ("short_run", traj.status == "Completed", f"status {traj.status}, forcing={params.forcing_active}")
        )

    all_ok = True
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        all_ok &= ok
    return 0 if all_ok else 1


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="hallshell",
        description="Simulate dyadic Hall-MHD shell models and verify their provable properties.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one configured trajectory and write its time series")
    p_sim.add_argument("config", help="path to a JSON run configuration")
    p_sim.add_argument("--out", help="output directory (overrides output.directory)")

    p_sweep = sub.add_parser("sweep", help="run an experiment over a parameter grid")
    p_sweep.add_argument("config", help="path to a JSON run configuration with a sweep section")
    p_sweep.add_argument("--out", help="output directory (overrides output.directory)")

    p_const = sub.add_parser("constants", help="print the blow-up certificate constants")
    p_const.add_argument("--lambda", dest="lam", type=float, required=True)
    p_const.add_argument("--gamma", type=float, required=True)
    p_const.add_argument("--theta", type=float, required=True)
    p_const.add_argument("--nu", type=float, default=0.0)
    p_const.add_argument("--mu", type=float, default=0.0)

    p_verify = sub.add_parser("verify", help="run the invariant suite on a short trajectory")
    p_verify.add_argument("config", help="path to a JSON run configuration")

    p_regime = sub.add_parser("regime", help="classify (theta, d_i) against the known thresholds")
    p_regime.add_argument("--theta", type=float, required=True)
    p_regime.add_argument("--d_i", type=float, default=0.0)

    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        if args.command == "constants":
            return _cmd_constants(args)
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "regime":
            return _cmd_regime(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    raise SystemExit(main())
