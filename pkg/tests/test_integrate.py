import dataclasses
import math

import numpy as np
import pytest
from scipy.optimize import root

from limm.coeffs import (
    fixed_coefficients,
    fractions_from_times,
    uniform_fractions,
    variable_coefficients,
)
from limm.errors import StepSizeTooSmallError
from limm.history import DifferenceHistory
from limm.integrate import (
    ControllerState,
    NewtonConfig,
    SolverOptions,
    admissible_interval,
    bdf_step,
    error_weights,
    estimate_error,
    initial_step,
    integrate_adaptive,
    integrate_fixed,
    limm_step,
    limm_step_raw,
    propose_next,
    reference_solution,
    relative_error,
    rk4,
)
from limm.linalg import LinearOperator, LinearSolveConfig, ShiftedSolver
from limm.problems import OdeProblem, augment_time, dahlquist, gray_scott, lorenz96


def _history(times, ys, fs, k):
    return DifferenceHistory.from_points(times, ys, fs, k_current=k)


class TestLimmStep:
    @pytest.mark.parametrize("family", ["LIMM", "LIMM-W"])
    def test_order_one_is_implicit_euler(self, family):
        lam, h = -3.0, 0.2
        m = fixed_coefficients(family, 1)
        hist = _history([0.0], [[1.5]], [[lam * 1.5]], 1)
        y = limm_step(hist, m, h, LinearOperator.from_matrix([[lam]]), ShiftedSolver())
        assert y[0] == pytest.approx(1.5 / (1 - h * lam), rel=1e-15)

    def test_two_thirds(self):
        hist = _history([0.0], [[1.0]], [[-1.0]], 1)
        y = limm_step(hist, fixed_coefficients("LIMM", 1), 0.5, LinearOperator.from_matrix([[-1.0]]), ShiftedSolver())
        assert y[0] == pytest.approx(2 / 3, rel=1e-15)

    @pytest.mark.parametrize("family", ["LIMM", "LIMM-W"])
    @pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
    def test_dd_form_matches_raw_form_uniform(self, family, k):
        p = lorenz96(12)
        rng = np.random.default_rng(k)
        h = 0.01
        times = -h * np.arange(k)
        ys = np.array([p.y0 + np.sin(3 * t) + 0.1 * rng.normal(size=12) for t in times])
        fs = np.array([p.rhs(t, y) for t, y in zip(times, ys)])
        m = fixed_coefficients(family, k)
        J = LinearOperator.from_matrix(p.jacobian(0.0, ys[0]))
        ft = p.dfdt(0.0, ys[0])
        dd = limm_step(_history(times, ys, fs, k), m, h, J, ShiftedSolver(), ft)
        raw = limm_step_raw(ys, fs, m, h, J, ShiftedSolver(), ft)
        np.testing.assert_allclose(dd, raw, rtol=1e-12, atol=1e-12)

    @pytest.mark.parametrize("family", ["LIMM", "LIMM-W"])
    def test_dd_form_matches_raw_form_variable(self, family):
        p = lorenz96(8)
        times = np.array([0.0, -0.011, -0.019, -0.032, -0.04])
        ys = np.array([p.y0 * (1 + t) for t in times])
        fs = np.array([p.rhs(t, y) for t, y in zip(times, ys)])
        h = 0.012
        m = variable_coefficients(family, 5, fractions_from_times(times, h))
        J = LinearOperator.from_matrix(p.jacobian(0.0, ys[0]))
        dd = limm_step(_history(times, ys, fs, 5), m, h, J, ShiftedSolver())
        raw = limm_step_raw(ys, fs, m, h, J, ShiftedSolver())
        np.testing.assert_allclose(dd, raw, rtol=1e-12, atol=1e-12)

    def test_gmres_matches_direct(self):
        p = gray_scott(8)
        y = p.y0
        hist = _history([0.0], [y], [p.rhs(0, y)], 1)
        m = fixed_coefficients("LIMM", 1)
        direct = limm_step(hist, m, 0.05, LinearOperator.from_matrix(p.jacobian(0, y)), ShiftedSolver())
        op = LinearOperator(p.dimension, lambda v: p.jvp(0, y, v))
        it = limm_step(hist, m, 0.05, op, ShiftedSolver(LinearSolveConfig("gmres", gmres_tol=1e-12)))
        np.testing.assert_allclose(it, direct, atol=1e-10)


class TestBdfStep:
    def test_dahlquist_one_iteration(self):
        lam, h = -2.0, 0.1
        weights = np.ones(1) * 1e8
        y, iters = bdf_step(
            lambda t, y: lam * y,
            lambda t, y: LinearOperator.from_matrix([[lam]]),
            h,
            np.array([-1.0]),
            np.array([1.0]),
            h,
            1.0,
            ShiftedSolver(),
            weights,
        )
        assert y[0] == pytest.approx(1 / (1 - h * lam), rel=1e-14)
        # the first update solves the linear problem exactly; the second confirms it
        assert iters <= 2

    def test_gray_scott_bdf3_against_tight_newton(self):
        p = gray_scott(16)
        h = 0.01
        times = -h * np.arange(3)
        ys = [p.y0 * (1 + 0.01 * t) for t in times]
        m = fixed_coefficients("BDF", 3)
        s_alpha = m.alpha[1:] @ np.array(ys)
        pred = 3 * ys[0] - 3 * ys[1] + ys[2]
        weights = error_weights(ys[0], ys[0], 1e-10, 1e-10)
        y, _ = bdf_step(
            p.rhs,
            lambda t, y: LinearOperator.from_matrix(p.jacobian(t, y)),
            h,
            s_alpha,
            pred,
            h,
            m.beta_implicit,
            ShiftedSolver(),
            weights,
            NewtonConfig(max_iterations=20),
        )
        sol = root(
            lambda x: x + s_alpha - h * m.beta_implicit * p.rhs(h, x),
            pred,
            jac=lambda x: np.eye(p.dimension) - h * m.beta_implicit * p.jacobian(h, x),
            tol=1e-13,
        )
        np.testing.assert_allclose(y, sol.x, atol=1e-9)

    def test_bdf2_quadratic_exact(self):
        base = OdeProblem("ramp", (0.0, 1.0), np.array([0.0]), lambda t, y: np.array([2 * t]), autonomous=False)
        p = augment_time(base)
        tr = integrate_fixed(p, "BDF", 2, 0.1)
        np.testing.assert_allclose(tr.states[:, 0], tr.times**2, atol=1e-13)


class TestEstimate:
    def test_polynomial_gives_zero(self):
        times = np.array([0.0, -0.1, -0.25, -0.3])
        ys = (1 + times + 2 * times**2)[:, None]
        hist = _history(times, ys, 1 + 4 * ys, 3)
        t_new = 0.1
        cand = hist.candidate_differences(t_new, np.array([1 + t_new + 2 * t_new**2]))
        c = fractions_from_times(times, t_new)
        assert estimate_error(cand, c, "LIMM", 2, t_new, np.ones(1)) == pytest.approx(0, abs=1e-12)

    def test_t_squared_limmw1(self):
        h = 0.1
        times = -h * np.arange(3)
        hist = _history(times, (times**2)[:, None], (2 * times)[:, None], 1)
        cand = hist.candidate_differences(h, np.array([h * h]))
        e = estimate_error(cand, uniform_fractions(1), "LIMM-W", 1, h, np.ones(1))
        assert e == pytest.approx(h * h, rel=1e-12)

    @pytest.mark.parametrize("family", ["LIMM", "LIMM-W", "BDF"])
    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_scaling_law(self, family, k):
        def est(h):
            times = -h * np.arange(k + 1)
            hist = _history(times, np.exp(times)[:, None], np.exp(times)[:, None], k)
            cand = hist.candidate_differences(h, np.exp([h]))
            return estimate_error(cand, uniform_fractions(k), family, k, h, np.ones(1))

        h = 1e-3
        assert est(2 * h) / est(h) == pytest.approx(2.0 ** (k + 1), rel=0.01)


class TestController:
    def test_unit_error(self):
        d = propose_next(ControllerState(0.1, 1, steps_at_current_h=3, steps_at_current_k=3), None, 1.0, None)
        assert d.accept and d.k_next == 1
        assert d.h_next == pytest.approx(0.09)

    def test_quarter_error_doubles_hopt(self):
        d = propose_next(ControllerState(0.1, 1, steps_at_current_h=3), None, 0.25, None)
        assert d.accept
        assert d.h_next == pytest.approx(0.9 * 0.2)

    def test_reject(self):
        d = propose_next(ControllerState(0.1, 3, consecutive_rejections=0), None, 16.0, None)
        assert not d.accept and d.k_next == 3
        assert d.h_next == pytest.approx(0.1 * 0.5 * 0.9)

    def test_reject_floor(self):
        d = propose_next(ControllerState(0.1, 2), None, 1e12, None)
        assert d.h_next == pytest.approx(0.01)

    def test_third_rejection_drops_order(self):
        d = propose_next(ControllerState(0.1, 3, consecutive_rejections=2), None, 2.0, None)
        assert not d.accept and d.k_next == 2

    def test_ratio_clamp(self):
        d = propose_next(ControllerState(0.1, 1, steps_at_current_h=5), None, 1e-9, None)
        assert d.h_next == pytest.approx(0.2)

    def test_h_max(self):
        d = propose_next(ControllerState(0.1, 1, h_max=0.15), None, 1e-9, None)
        assert d.h_next == pytest.approx(0.15)

    def test_increase_gated(self):
        d = propose_next(ControllerState(0.1, 3, steps_at_current_h=0, steps_at_current_k=0), None, 0.01, None)
        assert d.h_next == pytest.approx(0.1)
        d = propose_next(ControllerState(0.1, 3, steps_at_current_h=2, steps_at_current_k=0), None, 0.01, None)
        assert d.h_next > 0.1

    def test_order_change_gated(self):
        ctrl = ControllerState(0.1, 2, steps_at_current_h=5, steps_at_current_k=1)
        assert propose_next(ctrl, None, 0.5, 1e-6).k_next == 2
        ctrl = dataclasses.replace(ctrl, steps_at_current_k=2)
        assert propose_next(ctrl, 0.4, 0.5, 1e-6).k_next == 3
        assert propose_next(ctrl, 1e-6, 0.5, 0.4).k_next == 1

    def test_tie_goes_to_lower_order(self):
        ctrl = ControllerState(0.1, 2, steps_at_current_h=5, steps_at_current_k=5)
        assert propose_next(ctrl, 0.0, 0.0, 0.0).k_next == 1

    def test_h_min(self):
        with pytest.raises(StepSizeTooSmallError):
            propose_next(ControllerState(1e-3, 1, h_min=5e-4), None, 1e6, None)

    def test_initial_step(self):
        h = initial_step(np.array([10.0]), np.array([0.0]), (0.0, 1.0), 1e-3, 1e-3)
        assert h == pytest.approx(0.5 / (10 / 1e-3))
        assert initial_step(np.zeros(2), np.ones(2), (0.0, 5.0), 1e-3, 1e-3) == pytest.approx(0.05)

    def test_admissible_interval(self):
        lo, hi = admissible_interval(np.array([0.0, -0.1, -0.3]), 3)
        assert lo == pytest.approx(0.1)
        assert hi == pytest.approx(0.2)
        assert admissible_interval(np.array([0.0, -0.1]), 1) == (0.0, math.inf)


def _check_invariants(r, family, tf):
    assert r.final_time == tf
    if family != "BDF":
        assert r.n_linear_solves == r.n_accepted + r.n_rejected
    accepted = [rec for rec in r.trace if rec.accepted]
    hs = np.array([rec.h for rec in accepted])
    ratios = hs[1:-1] / hs[:-2]
    assert np.all(ratios <= 2.0 + 1e-12)


class TestAdaptive:
    @pytest.mark.parametrize("family", ["LIMM", "LIMM-W", "BDF"])
    def test_dahlquist(self, family):
        r = integrate_adaptive(dahlquist(-1.0), family, SolverOptions(rtol=1e-6, atol=1e-6, trace=True))
        assert abs(r.final_state[0] - math.exp(-1)) <= 1e-4
        _check_invariants(r, family, 1.0)

    @pytest.mark.parametrize("family", ["LIMM", "LIMM-W", "BDF"])
    def test_zero_rhs(self, family):
        p = OdeProblem("zero", (0.0, 10.0), np.array([1.0, -2.0]), lambda t, y: np.zeros(2), jacobian=lambda t, y: np.zeros((2, 2)))
        r = integrate_adaptive(p, family, SolverOptions(h_max=1.0, trace=True))
        assert r.n_rejected == 0
        np.testing.assert_array_equal(r.final_state, p.y0)
        assert max(rec.h for rec in r.trace) == pytest.approx(1.0)
        assert r.final_time == 10.0

    def test_lorenz96_limm(self):
        p = lorenz96(40)
        r = integrate_adaptive(p, "LIMM", SolverOptions(rtol=1e-8, atol=1e-8, trace=True))
        assert np.abs(r.final_state - reference_solution(p, 2**13)).max() <= 1e-5
        _check_invariants(r, "LIMM", 0.5)

    def test_limmw_jacobian_reuse(self):
        p = lorenz96(20)
        fresh = integrate_adaptive(p, "LIMM-W", SolverOptions(rtol=1e-6, atol=1e-6))
        lagged = integrate_adaptive(p, "LIMM-W", SolverOptions(rtol=1e-6, atol=1e-6, jacobian_reuse=4))
        assert lagged.n_jac_evals < fresh.n_jac_evals
        assert lagged.n_linear_solves == lagged.n_accepted + lagged.n_rejected
        ref = reference_solution(p, 2**12)
        assert relative_error(lagged.final_state, ref) <= 1e-4

    def test_deterministic(self):
        p = lorenz96(10)
        opts = SolverOptions(rtol=1e-5, atol=1e-5, trace=True)
        a = integrate_adaptive(p, "LIMM", opts)
        b = integrate_adaptive(p, "LIMM", opts)
        skip = {"wall_seconds", "trace", "final_state"}
        for f in dataclasses.fields(a):
            if f.name not in skip:
                assert getattr(a, f.name) == getattr(b, f.name)
        assert a.final_state.tobytes() == b.final_state.tobytes()
        assert [r[:5] for r in a.trace] == [r[:5] for r in b.trace]

    def test_missing_time_derivative(self):
        p = lorenz96(10)
        q = dataclasses.replace(p, dfdt=None)
        opts = SolverOptions(rtol=1e-8, atol=1e-8)
        a = integrate_adaptive(p, "LIMM", opts)
        b = integrate_adaptive(q, "LIMM", opts)
        np.testing.assert_allclose(a.final_state, b.final_state, atol=1e-6)

    def test_gmres_mode(self):
        p = gray_scott(8)
        opts = SolverOptions(rtol=1e-5, atol=1e-5)
        a = integrate_adaptive(p, "LIMM", opts)
        b = integrate_adaptive(p, "LIMM", dataclasses.replace(opts, linear=LinearSolveConfig("gmres")))
        assert b.n_gmres_iterations > 0
        assert b.n_linear_solves == b.n_accepted + b.n_rejected
        np.testing.assert_allclose(a.final_state, b.final_state, atol=1e-4)

    def test_tolerance_monotone(self):
        p = lorenz96(40)
        ref = reference_solution(p, 2**13)
        for family in ("LIMM", "LIMM-W", "BDF"):
            errs = [
                np.abs(integrate_adaptive(p, family, SolverOptions(rtol=tol, atol=tol)).final_state - ref).max()
                for tol in 10.0 ** -np.arange(2, 9)
            ]
            assert all(b <= 2 * a for a, b in zip(errs, errs[1:])), (family, errs)

    def test_h_min_abort(self):
        with pytest.raises(StepSizeTooSmallError):
            integrate_adaptive(dahlquist(-1.0), "LIMM", SolverOptions(rtol=1e-10, atol=1e-10, h_min=0.05))


class TestFixed:
    def test_dahlquist_order_one(self):
        tr = integrate_fixed(dahlquist(-1.0), "LIMM", 1, 0.1)
        assert tr.final_state[0] == pytest.approx((1 / 1.1) ** 10, rel=1e-14)
        np.testing.assert_allclose(tr.states[:, 0], (1 / 1.1) ** np.arange(11), rtol=1e-14)

    @pytest.mark.parametrize("family", ["LIMM", "LIMM-W"])
    @pytest.mark.parametrize("k", [2, 3, 4])
    def test_linear_problem_is_implicit_lmm(self, family, k):
        lam, h = -4.0, 0.05
        tr = integrate_fixed(dahlquist(lam), family, k, h)
        m = fixed_coefficients(family, k)
        ys = list(tr.states[:k, 0][::-1])
        sigma = m.beta + m.mu[1:]
        for _ in range(k, tr.times.size):
            nxt = (-(m.alpha[1:] @ ys[:k]) + h * lam * (sigma @ ys[:k])) / (1 - h * lam * m.mu[0])
            ys.insert(0, nxt)
        assert tr.final_state[0] == pytest.approx(ys[0], rel=1e-12)

    @pytest.mark.parametrize("k", [2, 3, 4, 5])
    def test_starter_accuracy(self, k):
        p = lorenz96(10)
        h = 2.0**-6
        tr = integrate_fixed(p, "LIMM", k, h)
        for j in range(1, k):
            ref = rk4(p.rhs, 0.0, p.y0, tr.times[j], 2000)
            assert np.abs(tr.states[j] - ref).max() <= h ** (k + 1)

    @pytest.mark.parametrize("family", ["LIMM", "LIMM-W", "BDF"])
    @pytest.mark.parametrize("k", [1, 3])
    def test_richardson_ratio(self, family, k):
        p = lorenz96(40)
        ref = reference_solution(p, 2**13)
        e1 = np.linalg.norm(integrate_fixed(p, family, k, 2.0**-7).final_state - ref)
        e2 = np.linalg.norm(integrate_fixed(p, family, k, 2.0**-8).final_state - ref)
        assert 2**k / 1.3 <= e1 / e2 <= 2**k * 1.3

    def test_augmented_matches_time_derivative_path(self):
        p = lorenz96(8)
        a = integrate_fixed(p, "LIMM", 3, 2.0**-6)
        b = integrate_fixed(augment_time(p), "LIMM", 3, 2.0**-6)
        np.testing.assert_allclose(b.states[:, :-1], a.states, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(b.states[:, -1], a.times, atol=1e-14)

    def test_bad_step(self):
        with pytest.raises(ValueError):
            integrate_fixed(dahlquist(-1.0), "LIMM", 3, 0.4)
        with pytest.raises(ValueError):
            integrate_fixed(dahlquist(-1.0), "LIMM", 1, 0.3)


def test_rk4_exact_on_cubic():
    y = rk4(lambda t, y: np.array([3 * t * t]), 0.0, [0.0], 2.0, 4)
    assert y[0] == pytest.approx(8.0, rel=1e-14)
