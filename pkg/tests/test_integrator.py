"""Stepper and trajectory machinery: exactness, order, events, determinism."""

import math

import numpy as np
import pytest

from hallshell import (
    BLOWUP_SUSPECTED,
    COMPLETED,
    OVERFLOW,
    DiagnosticsSpec,
    IntegratorOptions,
    ShellState,
    integrate,
    make_params,
    shell_wavenumbers,
    step,
)
from hallshell.experiments import geometric_state


def zero_kernel(a, b):
    return np.zeros_like(a), np.zeros_like(b)


K2_PARAMS = make_params(2.0, theta=1.0, nu=0.0, mu=0.0, d_i=1.0, k=2)
K2_STATE = ShellState(a=[1.0, 1.0], b=[1.0, 1.0])


class TestOptions:
    def test_validation(self):
        with pytest.raises(ValueError):
            IntegratorOptions(t_end=1.0, sample_dt=0.1, rtol=0.0)
        with pytest.raises(ValueError):
            IntegratorOptions(t_end=1.0, sample_dt=0.0)
        with pytest.raises(ValueError):
            IntegratorOptions(t_end=1.0, sample_dt=0.1, dt_min=1e-3, dt_init=1e-4)
        with pytest.raises(ValueError):
            IntegratorOptions(t_end=-1.0, sample_dt=0.1)


class TestStep:
    def test_pure_diffusion_exact_any_dt(self):
        p = make_params(2.0, theta=1.0, nu=0.3, mu=0.07, d_i=1.0, k=10)
        s0 = ShellState(a=np.linspace(1.0, 0.1, 10), b=np.linspace(2.0, 0.2, 10))
        lam2 = shell_wavenumbers(2.0, 2.0, 11)[1:]
        for dt in (1e-3, 0.5, 3.0, 50.0):
            s1, err = step(s0, dt, p, zero_kernel)
            np.testing.assert_array_equal(s1.a, s0.a * np.exp(-0.3 * lam2 * dt))
            np.testing.assert_array_equal(s1.b, s0.b * np.exp(-0.07 * lam2 * dt))
            assert err == 0.0

    def test_zero_state(self):
        p = make_params(2.0, theta=1.0, nu=0.1, mu=0.1, d_i=1.0, k=4)
        s0 = ShellState(a=np.zeros(4), b=np.zeros(4))
        s1, err = step(s0, 0.2, p)
        assert np.all(s1.a == 0.0) and np.all(s1.b == 0.0) and err == 0.0

    def test_k2_taylor(self):
        dt = 1e-5
        s1, _ = step(K2_STATE, dt, K2_PARAMS)
        np.testing.assert_allclose(s1.a, [1.0, 1.0], atol=4 * dt**2)
        np.testing.assert_allclose(s1.b, [1.0 - 4 * dt, 1.0 + 4 * dt], atol=20 * dt**2)

    def test_rejects_bad_dt_and_shapes(self):
        with pytest.raises(ValueError):
            step(K2_STATE, 0.0, K2_PARAMS)
        p3 = make_params(2.0, theta=1.0, nu=0.0, mu=0.0, d_i=1.0, k=3)
        with pytest.raises(ValueError):
            step(K2_STATE, 0.1, p3)

    def test_overflow_raises(self):
        explode = lambda a, b: (1e300 * (a + 1.0), 1e300 * (b + 1.0))
        with pytest.raises(OverflowError):
            step(K2_STATE, 10.0, K2_PARAMS, explode)


class TestIntegrate:
    def test_zero_horizon_single_sample(self):
        opts = IntegratorOptions(t_end=0.0, sample_dt=0.1)
        traj = integrate(K2_STATE, K2_PARAMS, opts)
        assert traj.status == COMPLETED
        assert len(traj.samples) == 1
        assert traj.samples[0].t == 0.0

    def test_sample_grid_and_final(self):
        opts = IntegratorOptions(t_end=1.0, sample_dt=0.25, rtol=1e-8, atol=1e-12)
        traj = integrate(K2_STATE, K2_PARAMS, opts)
        assert traj.status == COMPLETED
        times = traj.times
        assert np.all(np.diff(times) > 0.0)
        np.testing.assert_allclose(times, [0.0, 0.25, 0.5, 0.75, 1.0], atol=1e-9)

    def test_offset_start_time(self):
        s0 = ShellState(a=[1.0, 1.0], b=[1.0, 1.0], t=2.0)
        opts = IntegratorOptions(t_end=0.5, sample_dt=0.25)
        traj = integrate(s0, K2_PARAMS, opts)
        np.testing.assert_allclose(traj.times, [2.0, 2.25, 2.5], atol=1e-9)

    def test_deterministic_bitwise(self):
        p = make_params(2.0, theta=1.5, nu=0.01, mu=0.02, d_i=1.0, k=12)
        s0 = geometric_state(12, 2.0, 1.5, 1.0, 0.5)
        opts = IntegratorOptions(t_end=0.7, sample_dt=0.07, rtol=1e-9, atol=1e-13)
        t1 = integrate(s0, p, opts)
        t2 = integrate(s0, p, opts)
        assert t1.n_accepted == t2.n_accepted
        for x, y in zip(t1.samples, t2.samples):
            assert x.t == y.t
            assert np.array_equal(x.state.a, y.state.a)
            assert np.array_equal(x.state.b, y.state.b)

    def test_dense_sampling_exact_on_linear_flow(self):
        p = make_params(2.0, theta=1.0, nu=0.1, mu=0.05, d_i=1.0, k=12)
        s0 = ShellState(a=np.linspace(1.0, 0.1, 12), b=np.linspace(0.5, 0.05, 12))
        lam2 = shell_wavenumbers(2.0, 2.0, 13)[1:]
        opts = IntegratorOptions(t_end=1.0, sample_dt=0.157, rtol=1e-8, atol=1e-12, dt_init=0.3, dt_max=0.4)
        traj = integrate(s0, p, opts, zero_kernel)
        for smp in traj.samples:
            np.testing.assert_allclose(smp.state.a, s0.a * np.exp(-0.1 * lam2 * smp.t), rtol=5e-16, atol=1e-300)
            np.testing.assert_allclose(smp.state.b, s0.b * np.exp(-0.05 * lam2 * smp.t), rtol=5e-16, atol=1e-300)

    def test_dense_sampling_accuracy_nonlinear(self):
        # sampled values must agree with a run that lands exactly on the
        # sample times via small caps on the step size
        p = make_params(2.0, theta=1.0, nu=0.05, mu=0.05, d_i=1.0, k=8)
        s0 = geometric_state(8, 2.0, 1.0, 1.0, 0.5)
        coarse = integrate(s0, p, IntegratorOptions(t_end=0.5, sample_dt=0.05, rtol=1e-10, atol=1e-14))
        fine = integrate(s0, p, IntegratorOptions(t_end=0.5, sample_dt=0.05, rtol=1e-12, atol=1e-16, dt_max=0.01))
        for sc, sf in zip(coarse.samples, fine.samples):
            np.testing.assert_allclose(sc.state.a, sf.state.a, rtol=1e-7, atol=1e-12)

    def test_positivity_loss_event(self):
        # strong magnetic incoming flux drives a_2 negative from tiny data
        p = make_params(2.0, theta=1.0, nu=0.0, mu=0.0, d_i=0.0, k=3)
        s0 = ShellState(a=[1e-3, 1e-3, 1e-3], b=[1.0, 0.5, 0.1])
        opts = IntegratorOptions(t_end=0.5, sample_dt=0.05, positivity_watch=True, rtol=1e-9, atol=1e-13)
        traj = integrate(s0, p, opts)
        ev = traj.first_event("PositivityLoss")
        assert ev is not None
        assert ev.detail["field"] in ("a", "b")
        assert 1 <= ev.detail["shell"] <= 3
        assert traj.status == COMPLETED  # non-terminal event

    def test_energy_anomaly_on_energy_injecting_rhs(self):
        grow = lambda a, b: (0.5 * a, 0.5 * b)  # d/dt y = y/2: energy rises
        opts = IntegratorOptions(t_end=1.0, sample_dt=0.1, rtol=1e-9, atol=1e-13)
        traj = integrate(K2_STATE, K2_PARAMS, opts, grow)
        assert traj.first_event("EnergyAnomaly") is not None

    def test_no_anomaly_when_forced(self):
        p = make_params(2.0, theta=1.0, nu=0.1, mu=0.1, d_i=1.0, k=4, forcing_b=[1.0, 0.0, 0.0, 0.0])
        s0 = ShellState(a=np.zeros(4), b=np.zeros(4))
        traj = integrate(s0, p, IntegratorOptions(t_end=1.0, sample_dt=0.1))
        assert traj.status == COMPLETED
        assert traj.first_event("EnergyAnomaly") is None
        assert traj.samples[-1].row.e_total > 0.0

    def test_overflow_guard_triggers_blowup_suspected(self):
        grow = lambda a, b: (5.0 * a, 5.0 * b)
        opts = IntegratorOptions(t_end=200.0, sample_dt=1.0, rtol=1e-6, atol=1e-10, overflow_guard=1e6)
        traj = integrate(K2_STATE, K2_PARAMS, opts, grow)
        assert traj.status == BLOWUP_SUSPECTED
        ev = traj.first_event("BlowupSuspected")
        assert ev is not None and ev.detail["magnitude"] > 1e6

    def test_dt_collapse_reports_blowup(self):
        # genuinely supercritical Hall run: rates outrun any step size
        k = 6
        p = make_params(20.0, theta=3.5, nu=0.01, mu=0.01, d_i=1.0, k=k)
        prof = np.array([1.0, 0.1, 1e-18, 1e-36, 1e-54, 1e-72])
        s0 = ShellState(a=10.0 * prof, b=10.0 * prof)
        opts = IntegratorOptions(
            t_end=10.0, sample_dt=0.5, rtol=1e-8, atol=1e-30, dt_init=1e-6, dt_min=1e-13
        )
        traj = integrate(s0, p, opts)
        assert traj.status in (BLOWUP_SUSPECTED, OVERFLOW)
        assert traj.samples[-1].t < 1.0

    def test_diagnostics_rows(self):
        p = make_params(2.0, theta=1.0, nu=0.0, mu=0.0, d_i=1.0, k=4)
        s0 = ShellState(a=[1.0, 0.0, 0.0, 0.0], b=[0.0, 2.0, 0.0, 0.0])
        diag = DiagnosticsSpec(gamma=0.5, c1=0.1, c2=0.2)
        traj = integrate(s0, p, IntegratorOptions(t_end=0.0, sample_dt=1.0), diag=diag)
        row = traj.samples[0].row
        assert row.e_total == pytest.approx(5.0)
        assert row.e_a == pytest.approx(1.0)
        assert row.h1_a == pytest.approx(4.0)  # lam_1^2 * 1
        assert row.e_gamma == pytest.approx(2.0 * 1.0 + 2.0**2 * 4.0)  # lam^1, lam^2 weights
        assert row.min_a == 0.0 and row.min_b == 0.0
        assert row.lyapunov == pytest.approx(row.e_gamma)  # cross terms vanish here

    def test_mismatched_state_rejected(self):
        p3 = make_params(2.0, theta=1.0, nu=0.0, mu=0.0, d_i=1.0, k=3)
        with pytest.raises(ValueError):
            integrate(K2_STATE, p3, IntegratorOptions(t_end=1.0, sample_dt=0.1))


class TestConvergenceOrder:
    def test_fifth_order_on_k2_fixture(self):
        # reference by tiny fixed steps, then an adaptive tolerance scan;
        # slope of log error against log mean-step measures the order
        ref = K2_STATE
        n_ref = 2000
        for _ in range(n_ref):
            ref, _ = step(ref, 1.0 / n_ref, K2_PARAMS)
        errs, steps = [], []
        for rtol in (1e-5, 1e-6, 1e-7, 1e-8, 1e-9):
            opts = IntegratorOptions(t_end=1.0, sample_dt=1.0, rtol=rtol, atol=rtol * 1e-3, dt_init=1e-2)
            tr = integrate(K2_STATE, K2_PARAMS, opts)
            fs = tr.final_state
            errs.append(
                math.hypot(np.linalg.norm(fs.a - ref.a), np.linalg.norm(fs.b - ref.b))
            )
            steps.append(tr.n_accepted)
        slope = np.polyfit(np.log([1.0 / n for n in steps]), np.log(errs), 1)[0]
        assert slope >= 4.5
