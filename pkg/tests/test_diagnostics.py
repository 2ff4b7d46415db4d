"""Norms, distances, budgets, certificate constants, Lyapunov machinery."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hallshell import (
    PastBlowupError,
    ShellState,
    blowup_constants,
    check_lyapunov_sandwich,
    check_triple_bounds,
    energy_budget,
    hs_norm,
    integrate,
    IntegratorOptions,
    leray_hopf_check,
    lyapunov_value,
    make_params,
    riccati_blowup_time,
    riccati_lower_bound,
    strong_distance,
    weak_distance,
)
from hallshell.experiments import geometric_state

finite_seqs = st.lists(st.floats(-100.0, 100.0), min_size=1, max_size=20)


class TestHsNorm:
    def test_single_entry(self):
        assert hs_norm([1.0, 0.0, 0.0], 1.0, 2.0) == 2.0

    def test_zero(self):
        assert hs_norm(np.zeros(5), 0.7, 2.0) == 0.0

    def test_two_entry_half(self):
        # direct summation oracle: sqrt(2^1*1 + 2^2*1)
        assert hs_norm([1.0, 1.0], 0.5, 2.0) == pytest.approx(math.sqrt(6.0), rel=1e-15)

    @settings(max_examples=60, deadline=None)
    @given(finite_seqs)
    def test_s_zero_is_euclidean(self, xs):
        x = np.array(xs)
        assert hs_norm(x, 0.0, 2.0) == pytest.approx(float(np.linalg.norm(x)), rel=1e-12, abs=1e-300)

    @settings(max_examples=40, deadline=None)
    @given(finite_seqs, st.floats(0.0, 3.0), st.floats(0.1, 2.0))
    def test_monotone_in_s(self, xs, s, ds):
        x = np.array(xs)
        assert hs_norm(x, s, 2.0) <= hs_norm(x, s + ds, 2.0) * (1 + 1e-12)

    def test_gamma_below_gamma_plus_one(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            x = rng.standard_normal(12)
            assert hs_norm(x, 0.05, 20.0) <= hs_norm(x, 1.05, 20.0) * (1 + 1e-12)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            hs_norm([1.0, np.inf], 1.0, 2.0)


class TestWeakDistance:
    def test_identity(self):
        x = np.array([1.0, 2.0, 3.0])
        assert weak_distance(x, x) == 0.0

    def test_one_term(self):
        assert weak_distance([1.0, 0.0], [0.0, 0.0]) == 0.25

    def test_two_term(self):
        # 1/2 * 1/2 + 1/16 * 1/2
        assert weak_distance([1.0, 1.0], [0.0, 0.0]) == pytest.approx(0.28125, rel=1e-15)

    def test_pads_shorter(self):
        assert weak_distance([1.0], [1.0, 1.0]) == pytest.approx(0.03125, rel=1e-15)

    def test_bounded(self):
        # the supremum sum(2**-n*n) is approached but never exceeded
        big = 1e30 * np.ones(40)
        assert weak_distance(big, -big) <= sum(2.0 ** -(n * n) for n in range(1, 41))
        assert weak_distance([5.0, 5.0], [0.0, 0.0]) < 0.5 + 1.0 / 16.0

    @settings(max_examples=50, deadline=None)
    @given(finite_seqs, finite_seqs)
    def test_symmetry(self, u, v):
        assert weak_distance(u, v) == pytest.approx(weak_distance(v, u), rel=1e-14, abs=1e-300)

    @settings(max_examples=50, deadline=None)
    @given(finite_seqs, finite_seqs, finite_seqs)
    def test_triangle(self, u, v, w):
        duv = weak_distance(u, v)
        duw = weak_distance(u, w)
        dwv = weak_distance(w, v)
        assert duv <= duw + dwv + 1e-13

    def test_zero_iff_equal(self):
        assert weak_distance([1.0, 2.0], [1.0, 2.0 + 1e-12]) > 0.0

    def test_strong_distance(self):
        assert strong_distance([3.0, 0.0], [0.0, 4.0]) == 5.0


def _zero_trajectory():
    p = make_params(2.0, theta=1.0, nu=0.1, mu=0.1, d_i=1.0, k=4)
    s0 = ShellState(a=np.zeros(4), b=np.zeros(4))
    opts = IntegratorOptions(t_end=0.5, sample_dt=0.1, rtol=1e-8, atol=1e-12)
    return integrate(s0, p, opts), p


class TestEnergyBudget:
    def test_zero_trajectory_all_residuals_zero(self):
        traj, p = _zero_trajectory()
        rep = energy_budget(traj, p)
        assert np.all(rep.instantaneous == 0.0)
        assert np.all(rep.cumulative == 0.0)
        assert np.all(rep.decay_margin == 0.0)

    def test_empty_trajectory_rejected(self):
        from hallshell.integrator import Trajectory

        p = make_params(2.0, theta=1.0, nu=0.0, mu=0.0, d_i=0.0, k=2)
        with pytest.raises(ValueError):
            energy_budget(Trajectory(), p)

    def test_dissipative_run_budget(self):
        p = make_params(2.0, theta=1.0, nu=0.1, mu=0.1, d_i=1.0, k=12)
        s0 = geometric_state(12, 2.0, 2.0, 1.0, 0.5)
        traj = integrate(s0, p, IntegratorOptions(t_end=0.5, sample_dt=0.001, rtol=1e-10, atol=1e-16))
        rep = energy_budget(traj, p)
        assert rep.max_cumulative_rel < 1e-6
        assert rep.min_decay_margin_rel > -1e-8


class TestLerayHopf:
    def test_equal_times_pass_zero_slack(self):
        traj, p = _zero_trajectory()
        res = leray_hopf_check(traj, p, 0.2, 0.2)
        assert res.passed and res.slack == 0.0

    def test_dissipative_pass(self):
        p = make_params(2.0, theta=1.0, nu=0.2, mu=0.1, d_i=1.0, k=10)
        s0 = geometric_state(10, 2.0, 2.0, 1.0, 0.4)
        traj = integrate(s0, p, IntegratorOptions(t_end=1.0, sample_dt=0.005, rtol=1e-10, atol=1e-16))
        res = leray_hopf_check(traj, p, 0.1, 0.9)
        assert res.passed

    def test_energy_injected_fixture_fails(self):
        # append an amplified state: the inequality between the last two
        # sample times must then fail
        from hallshell.integrator import Sample, Trajectory, DiagnosticsRow

        p = make_params(2.0, theta=1.0, nu=0.1, mu=0.1, d_i=1.0, k=4)
        s0 = geometric_state(4, 2.0, 1.0, 1.0)
        traj = integrate(s0, p, IntegratorOptions(t_end=0.3, sample_dt=0.05, rtol=1e-9, atol=1e-13))
        last = traj.samples[-1]
        boosted = ShellState(a=3.0 * last.state.a, b=3.0 * last.state.b, t=last.t + 0.05)
        row = DiagnosticsRow(
            dt=0.05, e_total=0.0, e_a=0.0, e_b=0.0, h1_a=0.0, h1_b=0.0,
            e_gamma=0.0, lyapunov=0.0, min_a=0.0, min_b=0.0,
        )
        traj.samples.append(Sample(t=last.t + 0.05, state=boosted, row=row))
        res = leray_hopf_check(traj, p, 0.0, last.t + 0.05)
        assert not res.passed

    def test_times_outside_span_rejected(self):
        traj, p = _zero_trajectory()
        with pytest.raises(ValueError):
            leray_hopf_check(traj, p, -1.0, 0.2)
        with pytest.raises(ValueError):
            leray_hopf_check(traj, p, 0.0, 7.0)


class TestBlowupConstants:
    def test_epsilon_exact_power(self):
        assert blowup_constants(0.1, 8.0, 4.0, 0.0, 0.0).epsilon == 0.5

    def test_c0_exact(self):
        c = blowup_constants(0.5, 2.0, 4.0, 0.0, 0.0)
        assert c.c0 == 1.0

    def test_identities(self):
        c = blowup_constants(0.05, 20.0, 3.5, 0.01, 0.01)
        assert c.epsilon == 2.0 * 20.0 ** (-2.0 / 3.0)
        assert c.c2 == 1.8 * c.c1
        assert c.M0 == (4.0 * c.M1 / (c.c0 * c.c3)) * math.sqrt(c.sandwich_factor_printed)
        assert c.M0 > 4.0 * c.M1 / (c.c0 * c.c3)
        assert c.c3 == min(c.lhs11, c.lhs12)

    def test_valid_at_reference_point(self):
        c = blowup_constants(0.05, 20.0, 3.5, 0.01, 0.01)
        assert c.valid and c.cond11 and c.cond12 and c.cond13 and c.cond14
        assert c.riccati_C == pytest.approx(0.25 * c.c0 * c.c3 * c.sandwich_factor_printed ** -1.5)

    def test_small_lambda_reported_not_asserted(self):
        c = blowup_constants(0.05, 2.0, 3.5, 0.01, 0.01)
        assert not c.valid
        assert not (c.cond11 and c.cond12 and c.cond13 and c.cond14)
        assert c.c3 < 0.0  # the failing combination is visible, not hidden

    def test_theta_too_small_invalid(self):
        c = blowupc = blowup_constants(0.5, 20.0, 2.9, 0.0, 0.0)
        assert not c.valid
        assert math.isnan(c.c0) and math.isnan(c.M0)

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            blowup_constants(-0.1, 20.0, 3.5, 0.0, 0.0)
        with pytest.raises(ValueError):
            blowup_constants(0.1, 0.9, 3.5, 0.0, 0.0)

    def test_against_high_precision_oracle(self):
        mp = pytest.importorskip("mpmath")
        mp.mp.dps = 50
        gamma, lam, theta, nu, mu = map(mp.mpf, ("0.05", "20", "3.5", "0.01", "0.01"))
        eps = 2 * lam ** (mp.mpf(-2) / 3)
        c2f = mp.mpf(16) / 17 * (lam ** (2 * gamma) - 1) * lam ** (
            mp.mpf(1) / 3 + 2 * gamma / eps - (2 * gamma + theta) / 3
        )
        c1 = c2f / mp.mpf("1.8")
        c2 = c2f
        lhs11 = (
            c1 * (eps - lam ** (-(2 * gamma + theta) / 2) / 2 - lam ** (2 * (gamma - theta) / 3) / 3 - lam ** (mp.mpf(-2) / 3) / 3)
            - c2 / 3 * (lam ** (-2 * (2 * gamma + theta + 2) / 3) + lam ** (-2 * gamma - mp.mpf(4) / 3))
            - mp.mpf(2) / 3 * (lam ** (2 * gamma) - 1) * lam ** (-(2 * gamma + theta + 2) / 3)
        )
        lhs12 = (
            c2 * (eps - 2 * lam ** (-2 * (2 * gamma + theta + 2) / 3) / 3 - 2 * lam ** (-2 * gamma - mp.mpf(4) / 3) / 3 - lam ** (-(2 * gamma + theta + 1) / 2) / 2)
            - 2 * c1 / 3 * (lam ** (2 * (gamma - theta) / 3) + lam ** (mp.mpf(-2) / 3))
            - mp.mpf(4) / 3 * (lam ** (2 * gamma) - 1) * lam ** (-(2 * gamma + theta + 2) / 3)
        )
        c3 = min(lhs11, lhs12)
        c0 = mp.sqrt(lam ** (2 * (theta - gamma - 3)) - 1)
        M1 = 2 * (nu + mu) + (c1 * nu + c2 * mu) * (1 + lam ** 2) * lam ** (-gamma - 1)
        sandwich = 1 + (c1 + c2) * lam ** (-gamma - 1)
        M0 = 4 * M1 / (c0 * c3) * mp.sqrt(sandwich)
        riccati = c0 * c3 / 4 * sandwich ** mp.mpf("-1.5")

        got = blowup_constants(0.05, 20.0, 3.5, 0.01, 0.01)
        for name, exact in [
            ("epsilon", eps), ("c0", c0), ("c1", c1), ("c2", c2), ("c3", c3),
            ("M1", M1), ("M0", M0), ("riccati_C", riccati),
        ]:
            rel = abs(getattr(got, name) - float(exact)) / float(abs(exact))
            assert rel <= 1e-12, (name, rel)


class TestLyapunov:
    consts = blowup_constants(0.05, 20.0, 3.5, 0.01, 0.01)

    def test_zero_state(self):
        s = ShellState(a=np.zeros(6), b=np.zeros(6))
        assert lyapunov_value(s, self.consts) == 0.0

    def test_single_shell(self):
        s = ShellState(a=[3.0, 0.0, 0.0], b=np.zeros(3))
        expected = 20.0 ** (2 * 0.05) * 9.0
        assert lyapunov_value(s, self.consts) == pytest.approx(expected, rel=1e-14)

    def test_warns_on_negative(self):
        s = ShellState(a=[-1.0, 0.0], b=[0.0, 0.0])
        with pytest.warns(UserWarning):
            lyapunov_value(s, self.consts)

    def test_sandwich_random_nonnegative(self):
        rng = np.random.default_rng(42)
        for _ in range(300):
            s = ShellState(a=np.abs(rng.standard_normal(16)), b=np.abs(rng.standard_normal(16)))
            rep = check_lyapunov_sandwich(s, self.consts)
            assert rep.holds

    def test_printed_factor_fails_for_adjacent_shells(self):
        # documents why the weaker lam**(-gamma-1) factor cannot be asserted:
        # two equal adjacent shells already break it at lam = 20
        s = ShellState(a=np.array([1.0, 1.0, 0.0, 0.0]), b=np.zeros(4))
        rep = check_lyapunov_sandwich(s, self.consts)
        assert rep.holds
        assert not rep.holds_printed


class TestTripleBounds:
    def test_single_shell_margins(self):
        s = ShellState(a=[0.0, 2.0, 0.0, 0.0], b=[1.0, 0.0, 0.0, 0.0])
        rep = check_triple_bounds(s, 0.05, 3.5, 20.0)
        assert rep.all_hold
        assert rep.cross_a_lhs == 0.0 and rep.cross_b_lhs == 0.0
        assert rep.cubic_a_lhs > rep.cubic_a_rhs > 0.0

    def test_zero_state_equalities(self):
        s = ShellState(a=np.zeros(5), b=np.zeros(5))
        rep = check_triple_bounds(s, 0.05, 3.5, 20.0)
        assert rep.all_hold
        assert rep.cubic_a_lhs == rep.cubic_a_rhs == 0.0

    def test_random_nonnegative(self):
        rng = np.random.default_rng(1)
        for _ in range(300):
            s = ShellState(a=np.abs(rng.standard_normal(12)), b=np.abs(rng.standard_normal(12)))
            assert check_triple_bounds(s, 0.05, 3.5, 20.0).all_hold

    def test_negative_entries_rejected(self):
        s = ShellState(a=[-1.0, 0.0], b=[0.0, 0.0])
        with pytest.raises(ValueError):
            check_triple_bounds(s, 0.05, 3.5, 20.0)

    def test_theta_domain(self):
        s = ShellState(a=[1.0], b=[1.0])
        with pytest.raises(ValueError):
            check_triple_bounds(s, 0.5, 3.2, 20.0)


class TestRiccati:
    def test_initial_value(self):
        assert riccati_lower_bound(7.0, 3.0, 0.0) == 7.0

    def test_closed_form(self):
        # separable comparison equation with C=2, L0=1: t* = 1
        assert riccati_blowup_time(1.0, 2.0) == 1.0
        assert riccati_lower_bound(1.0, 2.0, 0.5) == pytest.approx(4.0, rel=1e-15)

    def test_past_blowup(self):
        with pytest.raises(PastBlowupError):
            riccati_lower_bound(1.0, 2.0, 1.0)

    def test_domain(self):
        with pytest.raises(ValueError):
            riccati_lower_bound(-1.0, 2.0, 0.1)
        with pytest.raises(ValueError):
            riccati_lower_bound(1.0, 2.0, -0.1)

    def test_monotone_growth(self):
        vals = [riccati_lower_bound(2.0, 0.5, t) for t in np.linspace(0.0, 1.0, 10)]
        assert all(v2 > v1 for v1, v2 in zip(vals, vals[1:]))
