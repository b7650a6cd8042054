"""Step kernels, local error estimation and the adaptive driver.

A LIMM or LIMM-W step solves one linear system

    (I - h mu_{-1} J) z = -sum_i alpha_i d_i + h sum_i beta_i f_{n-i}
                          + w + (time term),
    y_{n+1} = y_n + z - w,       w = sum_i (mu_i / mu_{-1}) d_i,

with increments ``d_i = y_{n-i} - y_n`` over the ``k`` stored points (the
``alpha`` and the ``mu`` weights each sum to zero, so this is the method as
written).  The substitution ``z`` removes the products ``J y_{n-i}`` from
the right-hand side, so only the shifted matrix is ever applied or
factored, and working with increments keeps rounding errors proportional
to the step.  Sums over past values are formed from
the stored divided differences with the transformed coefficients.  For a
non-autonomous right-hand side the time direction is linearised as well,
which adds ``-h^2 f_t sum_{i>=-1} mu_i c_i``.

BDF steps solve the implicit relation with a simplified Newton iteration in
the same history framework, so the two families share the estimator and
the controller.
"""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .coeffs import (
    MAX_ORDER,
    MethodCoefficients,
    StepsizeFractions,
    canonical_family,
    error_constant,
    fixed_coefficients,
    is_admissible,
    transformed_coefficients,
    uniform_fractions,
    variable_coefficients,
)
from .errors import (
    ConvergenceError,
    DegenerateGridError,
    SingularMatrixError,
    StepFailure,
    StepSizeTooSmallError,
)
from .history import DifferenceHistory, _time_derivative, bootstrap
from .linalg import LinearOperator, LinearSolveConfig, ShiftedSolver
from .problems import OdeProblem, fd_jacobian
from .trace import TraceRecord

SAFETY = 0.9
RATIO_MIN, RATIO_MAX = 0.5, 2.0
REJECT_FLOOR = 0.1


@dataclass(frozen=True)
class NewtonConfig:
    """Simplified Newton iteration used by BDF steps.

    ``tol`` bounds the WRMS norm of the last update; ``refresh_ratio`` is the
    relative change of ``h beta_{-1}`` that forces a new Jacobian and LU.
    """

    max_iterations: int = 7
    tol: float = 0.1
    refresh_ratio: float = 0.2


@dataclass(frozen=True)
class SolverOptions:
    """Configuration of :func:`integrate_adaptive`.

    ``h_max`` defaults to the length of the interval.  With
    ``gmres_tol_from_rtol`` the GMRES tolerance is set to ``0.1 * rtol``.
    ``jacobian_reuse`` only affects LIMM-W: the frozen matrix is refreshed
    every ``jacobian_reuse`` accepted steps.
    """

    rtol: float = 1e-6
    atol: float = 1e-6
    h0: Optional[float] = None
    h_min: float = 0.0
    h_max: Optional[float] = None
    k_max: int = MAX_ORDER
    linear: LinearSolveConfig = field(default_factory=LinearSolveConfig)
    gmres_tol_from_rtol: bool = True
    jacobian_reuse: int = 1
    trace: bool = False
    max_steps: int = 1_000_000
    newton: NewtonConfig = field(default_factory=NewtonConfig)

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("rtol and atol must be positive")
        if not 1 <= self.k_max <= MAX_ORDER:
            raise ValueError(f"k_max must lie in 1..{MAX_ORDER}")
        if self.jacobian_reuse < 1:
            raise ValueError("jacobian_reuse must be at least 1")

    def effective_linear(self) -> LinearSolveConfig:
        if self.linear.mode == "gmres" and self.gmres_tol_from_rtol:
            return replace(self.linear, gmres_tol=0.1 * self.rtol)
        return self.linear


@dataclass(frozen=True)
class ControllerState:
    """Stepsize and order together with the counters that gate changes."""

    h: float
    k: int = 1
    steps_at_current_h: int = 0
    steps_at_current_k: int = 0
    consecutive_rejections: int = 0
    rtol: float = 1e-6
    atol: float = 1e-6
    h_min: float = 0.0
    h_max: float = math.inf
    k_max: int = MAX_ORDER

    def __post_init__(self):
        if not 1 <= self.k <= self.k_max:
            raise ValueError(f"order {self.k} outside 1..{self.k_max}")
        if min(self.steps_at_current_h, self.steps_at_current_k, self.consecutive_rejections) < 0:
            raise ValueError("counters must be nonnegative")


@dataclass(frozen=True)
class StepDecision:
    accept: bool
    h_next: float
    k_next: int


@dataclass
class SolverReport:
    """Outcome and work counters of one adaptive run."""

    family: str
    final_time: float
    final_state: np.ndarray
    n_accepted: int = 0
    n_rejected: int = 0
    n_f_evals: int = 0
    n_jac_evals: int = 0
    n_linear_solves: int = 0
    n_newton_iters: int = 0
    n_factorizations: int = 0
    n_gmres_iterations: int = 0
    n_resamples: int = 0
    n_step_failures: int = 0
    wall_seconds: float = 0.0
    trace: Optional[list] = None


# --------------------------------------------------------------------------
# norms


def error_weights(y_old, y_new, rtol: float, atol: float) -> np.ndarray:
    """Inverse WRMS scales ``1 / (atol + rtol max(|y_old|, |y_new|))``."""
    return 1.0 / (atol + rtol * np.maximum(np.abs(y_old), np.abs(y_new)))


def wrms(v, weights) -> float:
    v = np.asarray(v, dtype=float)
    return float(np.sqrt(np.mean((v * weights) ** 2)))


# --------------------------------------------------------------------------
# Jacobians


class _Counted:
    """Right-hand side and Jacobian wrappers that count evaluations."""

    def __init__(self, problem: OdeProblem, mode: str):
        self.problem = problem
        self.mode = mode
        self.n_f = 0
        self.n_jac = 0

    def rhs(self, t, y):
        self.n_f += 1
        return self.problem.rhs(t, y)

    def ft(self, t, y, f):
        if self.problem.autonomous:
            return None
        if self.problem.dfdt is None:
            self.n_f += 1
        return _time_derivative(self.problem, t, y, f)

    def jacobian(self, t, y) -> LinearOperator:
        """``J(t, y)`` as an operator; explicit matrix in direct mode."""
        self.n_jac += 1
        p = self.problem
        if self.mode == "gmres":
            return LinearOperator(p.dimension, lambda v: p.jvp(t, y, v))
        if p.jacobian is not None:
            return LinearOperator.from_matrix(p.jacobian(t, y))
        self.n_f += p.dimension + 1
        return LinearOperator.from_matrix(fd_jacobian(p.rhs, t, y))


def _jacobian_operator(problem: OdeProblem, t, y, mode: str) -> LinearOperator:
    return _Counted(problem, mode).jacobian(t, y)


# --------------------------------------------------------------------------
# step kernels


def _time_term(m: MethodCoefficients, h: float, ft) -> np.ndarray | float:
    if ft is None:
        return 0.0
    c = np.asarray(m.c[: m.k + 1], dtype=float) if m.c is not None else np.arange(-1.0, m.k)
    return -(h * h) * float(m.mu @ c) * ft


def _shifted_solve(solver: ShiftedSolver, J: LinearOperator, h: float, gamma: float, rhs, x0=None):
    try:
        z = solver.solve(J, h, gamma, rhs, x0)
    except (SingularMatrixError, ConvergenceError) as exc:
        raise StepFailure(f"linear solve failed: {exc}") from exc
    if not np.all(np.isfinite(z)):
        raise StepFailure("non-finite linear solve result")
    return z


def limm_step(
    hist: DifferenceHistory,
    m: MethodCoefficients,
    h: float,
    J: LinearOperator,
    solver: ShiftedSolver,
    ft=None,
) -> np.ndarray:
    """One LIMM or LIMM-W step from a divided-difference history.

    Parameters
    ----------
    hist : DifferenceHistory
        At least ``m.k`` stored points; ``m`` must be built for the
        fractions of these points and ``h``.
    m : MethodCoefficients
    h : float
    J : LinearOperator
        Exact Jacobian at ``(t_n, y_n)`` for LIMM, any matrix for LIMM-W.
    solver : ShiftedSolver
    ft : ndarray, optional
        ``df/dt`` at ``(t_n, y_n)`` for non-autonomous problems.

    Raises
    ------
    StepFailure
        If the linear solve fails.
    """
    k = m.k
    if hist.n_points < k or hist.f_diffs.shape[0] < k:
        raise DegenerateGridError(f"history holds too few points for k={k}")
    c = StepsizeFractions(m.c) if m.c is not None else uniform_fractions(k)
    ah, bh, mh = transformed_coefficients(m, c)
    hp = h ** np.arange(k)
    mu1 = m.mu_minus1
    # index 0 carries sum(alpha) = -1 and sum(mu) = -mu_{-1}; both are used exactly
    d = hist.y_diffs[1:k]
    s_a = (hp[1:] * ah[1:]) @ d
    w = (hp[1:] * mh[1:]) @ d / mu1
    rhs = -s_a + h * ((hp * bh) @ hist.f_diffs[:k]) + w + _time_term(m, h, ft)
    x0 = hist.evaluate(hist.t + h, degree=k) - hist.y + w if solver.cfg.mode == "gmres" else None
    return hist.y + (_shifted_solve(solver, J, h, mu1, rhs, x0) - w)


def limm_step_raw(ys, fs, m: MethodCoefficients, h: float, J: LinearOperator, solver: ShiftedSolver, ft=None):
    """Same step assembled from raw past values ``y_{n-i}``, ``f_{n-i}`` (newest first).

    Works with the increments ``y_{n-i} - y_n``, which is exact because the
    ``alpha`` and ``mu`` weights each sum to zero.
    """
    k = m.k
    ys = np.asarray(ys, dtype=float)[:k]
    fs = np.asarray(fs, dtype=float)[:k]
    d = ys[1:] - ys[0]
    mu1 = m.mu_minus1
    w = (m.mu[2:] / mu1) @ d
    rhs = -(m.alpha[2:] @ d) + h * (m.beta @ fs) + w + _time_term(m, h, ft)
    return ys[0] + (_shifted_solve(solver, J, h, mu1, rhs) - w)


@dataclass
class _NewtonState:
    """Jacobian and factorization carried between BDF steps."""

    J: Optional[LinearOperator] = None
    hb: float = 0.0
    fresh: bool = False


def bdf_step(
    rhs: Callable,
    jacobian: Callable,
    t_new: float,
    s_alpha,
    predictor,
    h: float,
    beta_implicit: float,
    solver: ShiftedSolver,
    weights,
    cfg: NewtonConfig = NewtonConfig(),
    state: _NewtonState | None = None,
):
    """Solve ``y + s_alpha = h beta_{-1} f(t_new, y)`` by simplified Newton.

    ``s_alpha`` is ``sum_{i>=0} alpha_i y_{n-i}``.  The iteration matrix
    ``I - h beta_{-1} J`` is kept in ``state`` and reused while ``h beta_{-1}``
    stays within ``cfg.refresh_ratio`` of the value it was built with.  A
    failed iteration with a stale matrix is retried once with a fresh
    Jacobian at the predictor.

    Returns
    -------
    (y, iterations)

    Raises
    ------
    StepFailure
        When Newton does not converge.
    """
    state = state if state is not None else _NewtonState()
    hb = h * beta_implicit
    if state.J is None or abs(hb / state.hb - 1.0) > cfg.refresh_ratio:
        state.J, state.hb, state.fresh = jacobian(t_new, predictor), hb, True
    total = 0
    while True:
        y = np.array(predictor, dtype=float)
        ok = False
        prev = None
        for it in range(cfg.max_iterations):
            total += 1
            g = y + s_alpha - hb * rhs(t_new, y)
            dy = _shifted_solve(solver, state.J, state.hb, 1.0, -g)
            y = y + dy
            nrm = wrms(dy, weights)
            if not np.isfinite(nrm):
                break
            if nrm <= cfg.tol:
                ok = True
                break
            if prev is not None and nrm > 0.9 * prev and it >= 2:
                break
            prev = nrm
        if ok:
            state.fresh = False
            return y, total
        if state.fresh:
            raise StepFailure("Newton iteration did not converge")
        state.J, state.hb, state.fresh = jacobian(t_new, predictor), hb, True


# --------------------------------------------------------------------------
# error estimate and controller


def estimate_error(cand, c: StepsizeFractions, family: str, q: int, h: float, weights) -> float:
    """WRMS norm of ``(q+1)! C_q(c) h^(q+1) delta^(q+1) y`` for an order-``q`` method.

    ``cand`` are the differences of the candidate point over the history
    (:meth:`DifferenceHistory.candidate_differences`).
    """
    m = variable_coefficients(family, q, c)
    const = error_constant(m, c, normalized=False)
    e = math.factorial(q + 1) * const * h ** (q + 1) * cand[q + 1]
    return wrms(e, weights)


def _h_factor(err: Optional[float], q: int) -> float:
    if err is None:
        return -math.inf
    if err <= 0.0:
        return math.inf
    return err ** (-1.0 / (q + 1))


def propose_next(ctrl: ControllerState, err_km1: Optional[float], err_k: float, err_kp1: Optional[float]) -> StepDecision:
    """Accept or reject the step and choose the next stepsize and order.

    Order ``k+1`` or ``k-1`` may replace ``k`` only after ``k+1`` accepted
    steps at the current order; the stepsize may grow only after ``k``
    accepted steps at the current stepsize.  Among the allowed orders the
    one with the largest optimal step wins, ties going to the lower order.

    Raises
    ------
    StepSizeTooSmallError
        If the proposed step falls below ``ctrl.h_min``.
    """
    h, k = ctrl.h, ctrl.k
    if not np.isfinite(err_k):
        err_k = math.inf
    if err_k > 1.0:
        k_next = k - 1 if ctrl.consecutive_rejections + 1 >= 3 and k > 1 else k
        factor = REJECT_FLOOR if err_k == math.inf else max(REJECT_FLOOR, SAFETY * err_k ** (-1.0 / (k + 1)))
        h_next = min(h * factor, ctrl.h_max)
        if h_next < ctrl.h_min:
            raise StepSizeTooSmallError(math.nan, h_next)
        return StepDecision(False, h_next, k_next)
    candidates = [(k, _h_factor(err_k, k))]
    if ctrl.steps_at_current_k + 1 >= k + 1:
        if k > 1 and err_km1 is not None:
            candidates.append((k - 1, _h_factor(err_km1, k - 1)))
        if k < ctrl.k_max and err_kp1 is not None:
            candidates.append((k + 1, _h_factor(err_kp1, k + 1)))
    best = max(f for _, f in candidates)
    k_next = min(q for q, f in candidates if f == best)
    ratio = min(max(SAFETY * best, RATIO_MIN), RATIO_MAX)
    if ratio > 1.0 and ctrl.steps_at_current_h + 1 < k:
        ratio = 1.0
    h_next = min(max(h * ratio, ctrl.h_min), ctrl.h_max)
    return StepDecision(True, h_next, k_next)


def initial_step(f0, y0, t_span, rtol: float, atol: float, h_min: float = 0.0, h_max: float = math.inf) -> float:
    """``min((tF - t0)/100, 0.5 / ||f0||)`` in the WRMS norm, clamped to the bounds."""
    span = t_span[1] - t_span[0]
    nf = wrms(f0, error_weights(y0, y0, rtol, atol))
    h = span / 100.0 if nf == 0.0 else min(span / 100.0, 0.5 / nf)
    return min(max(h, h_min), h_max)


def admissible_interval(times, k: int):
    """Stepsizes ``h`` for which the grid ``times`` gives admissible fractions at order ``k``.

    Returns ``(lo, hi)``; the interval may be empty (``lo > hi``).
    """
    lo, hi = 0.0, math.inf
    for i in range(1, min(k, len(times))):
        d = times[0] - times[i]
        lo = max(lo, d / (1.5 * i))
        hi = min(hi, 2.0 * d / i)
    return lo, hi


# --------------------------------------------------------------------------
# adaptive driver


def integrate_adaptive(problem: OdeProblem, family: str, opts: SolverOptions | None = None) -> SolverReport:
    """Integrate ``problem`` over its span with variable stepsize and order.

    Starts at order one from :func:`bootstrap`.  LIMM and LIMM-W attempt
    each step with exactly one linear solve; BDF runs a simplified Newton
    iteration.  The last step lands on the final time exactly.

    Raises
    ------
    StepSizeTooSmallError
        If the controller asks for a step below ``opts.h_min``.
    """
    opts = opts or SolverOptions()
    family = canonical_family(family)
    lin = opts.effective_linear()
    counted = _Counted(problem, lin.mode)
    solver = ShiftedSolver(lin)
    t0, tf = map(float, problem.t_span)
    span = tf - t0
    h_max = span if opts.h_max is None else opts.h_max
    h_floor = max(opts.h_min, 64 * np.finfo(float).eps * max(abs(t0), abs(tf), 1.0))
    y0 = np.asarray(problem.y0, dtype=float)
    report = SolverReport(family, t0, y0.copy(), trace=[] if opts.trace else None)
    start = _time.monotonic()

    f0 = counted.rhs(t0, y0)
    h = opts.h0 if opts.h0 is not None else initial_step(f0, y0, problem.t_span, opts.rtol, opts.atol, h_floor, h_max)
    hist = bootstrap(problem, y0, h, f0=f0, t0=t0, k_max=opts.k_max)
    counted.n_jac += 1  # the product J0 f0 inside bootstrap
    ctrl = ControllerState(h, 1, rtol=opts.rtol, atol=opts.atol, h_min=h_floor, h_max=h_max, k_max=opts.k_max)
    newton = _NewtonState()
    J = None
    J_point = None
    since_refresh = 0

    def attempt_h(h):
        rem = tf - hist.t
        if rem <= h * (1.0 + 1e-12):
            return rem
        if rem < 2.0 * h:
            return 0.5 * rem
        return h

    for _ in range(opts.max_steps):
        if hist.t >= tf:
            break
        k = ctrl.k
        h = attempt_h(ctrl.h)
        t_new = tf if h == tf - hist.t else hist.t + h
        c = hist.fractions(h, k)
        work = hist
        if not is_admissible(c, k):
            work = hist.resample(h)
            c = uniform_fractions(k)
            report.n_resamples += 1
        m = variable_coefficients(family, k, c)
        y_n = hist.y
        try:
            if family == "BDF":
                cc = StepsizeFractions(m.c)
                ah, _, _ = transformed_coefficients(m, cc)
                s_alpha = (h ** np.arange(k) * ah) @ work.y_diffs[:k]
                pred = work.evaluate(t_new, degree=k)
                y_new, iters = bdf_step(
                    counted.rhs,
                    counted.jacobian,
                    t_new,
                    s_alpha,
                    pred,
                    h,
                    m.beta_implicit,
                    solver,
                    error_weights(y_n, y_n, opts.rtol, opts.atol),
                    opts.newton,
                    newton,
                )
                report.n_newton_iters += iters
            else:
                refresh = family == "LIMM" or J is None or since_refresh >= opts.jacobian_reuse
                if J is None or (refresh and J_point != hist.t):
                    J = counted.jacobian(hist.t, y_n)
                    J_point, since_refresh = hist.t, 0
                ft = counted.ft(hist.t, y_n, hist.f)
                y_new = limm_step(work, m, h, J, solver, ft)
            if not np.all(np.isfinite(y_new)):
                raise StepFailure("non-finite step result")
        except StepFailure:
            report.n_step_failures += 1
            report.n_rejected += 1
            if opts.trace:
                report.trace.append(TraceRecord(t_new, h, k, math.inf, False))
            h_next = 0.5 * h
            if h_next < ctrl.h_min:
                raise StepSizeTooSmallError(hist.t, h_next) from None
            ctrl = replace(ctrl, h=h_next, steps_at_current_h=0, consecutive_rejections=ctrl.consecutive_rejections + 1)
            newton.J = None
            continue

        weights = error_weights(y_n, y_new, opts.rtol, opts.atol)
        cand = work.candidate_differences(t_new, y_new)
        err_k = estimate_error(cand, c, family, k, h, weights)
        gate = ctrl.steps_at_current_k + 1 >= k + 1
        err_km1 = estimate_error(cand, c, family, k - 1, h, weights) if gate and k > 1 else None
        err_kp1 = None
        if gate and k < opts.k_max and work.n_points >= k + 2:
            c1 = work.fractions(h, k + 1)
            if is_admissible(c1, k + 1):
                err_kp1 = estimate_error(cand, c1, family, k + 1, h, weights)
        step_ctrl = replace(ctrl, h=h)
        try:
            dec = propose_next(step_ctrl, err_km1, err_k, err_kp1)
        except StepSizeTooSmallError:
            raise StepSizeTooSmallError(hist.t, h * REJECT_FLOOR) from None
        if opts.trace:
            report.trace.append(TraceRecord(t_new, h, k, err_k, dec.accept, y_new if dec.accept else None))
        if not dec.accept:
            report.n_rejected += 1
            ctrl = replace(
                ctrl,
                h=dec.h_next,
                k=dec.k_next,
                steps_at_current_h=0,
                steps_at_current_k=0 if dec.k_next != k else ctrl.steps_at_current_k,
                consecutive_rejections=0 if dec.k_next != k else ctrl.consecutive_rejections + 1,
            )
            continue

        report.n_accepted += 1
        since_refresh += 1
        f_new = counted.rhs(t_new, y_new)
        hist = work.append(t_new, y_new, f_new, dec.k_next)
        h_next = dec.h_next
        lo, hi = admissible_interval(hist.times, dec.k_next)
        if lo <= hi:
            h_next = min(max(h_next, lo), hi)
        h_next = min(h_next, h_max)
        ctrl = replace(
            ctrl,
            h=h_next,
            k=dec.k_next,
            steps_at_current_h=ctrl.steps_at_current_h + 1 if h_next == h else 0,
            steps_at_current_k=ctrl.steps_at_current_k + 1 if dec.k_next == k else 0,
            consecutive_rejections=0,
        )
    else:
        raise StepSizeTooSmallError(hist.t, ctrl.h)

    report.wall_seconds = _time.monotonic() - start
    report.final_time = hist.t
    report.final_state = hist.y.copy()
    report.n_f_evals = counted.n_f
    report.n_jac_evals = counted.n_jac
    report.n_linear_solves = solver.n_solves
    report.n_factorizations = solver.n_factorizations
    report.n_gmres_iterations = solver.n_gmres_iterations
    return report


# --------------------------------------------------------------------------
# fixed-step driver


def rk4(rhs: Callable, t0: float, y0, t1: float, n_steps: int) -> np.ndarray:
    """Classic explicit Runge-Kutta 4 with ``n_steps`` equal steps from ``t0`` to ``t1``.

    The state update uses compensated summation so that long reference runs
    do not accumulate rounding error.
    """
    y = np.array(y0, dtype=float)
    comp = np.zeros_like(y)
    dt = (t1 - t0) / n_steps
    t = t0
    for i in range(n_steps):
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * dt, y + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, y + 0.5 * dt * k2)
        k4 = rhs(t + dt, y + dt * k3)
        inc = dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4) - comp
        y_next = y + inc
        comp = (y_next - y) - inc
        y = y_next
        t = t0 + (i + 1) * dt
    return y


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def integrate_fixed(
    problem: OdeProblem,
    family: str,
    k: int,
    h: float,
    starter_substeps: int = 100,
    lin: LinearSolveConfig | None = None,
    newton: NewtonConfig = NewtonConfig(max_iterations=50, tol=1.0),
) -> Trajectory:
    """Fixed-step run of the tabulated ``k``-step method.

    The first ``k - 1`` values after ``y0`` come from RK4 with
    ``starter_substeps`` substeps per step.  LIMM and LIMM-W use the exact
    Jacobian at ``(t_n, y_n)``; BDF iterates Newton until the update is
    below ``newton.tol`` in the WRMS norm with ``rtol = atol = 1e-12``.

    Raises
    ------
    ValueError
        If the interval is not a whole number of at least ``k`` steps.
    StepFailure
        If a linear (or Newton) solve fails.
    """
    family = canonical_family(family)
    m = fixed_coefficients(family, k)
    t0, tf = map(float, problem.t_span)
    n = int(round((tf - t0) / h))
    if n < k or abs(n * h - (tf - t0)) > 1e-9 * max(1.0, abs(tf - t0)):
        raise ValueError("the interval must hold a whole number of at least k steps")
    lin = lin or LinearSolveConfig()
    solver = ShiftedSolver(lin)
    times = t0 + h * np.arange(n + 1)
    times[-1] = tf
    ys = np.empty((n + 1, problem.dimension))
    ys[0] = problem.y0
    for j in range(1, k):
        ys[j] = rk4(problem.rhs, times[j - 1], ys[j - 1], times[j], starter_substeps)
    fs = [problem.rhs(times[j], ys[j]) for j in range(k)]
    for j in range(k - 1, n):
        past_y = ys[j - k + 1 : j + 1][::-1]
        past_f = np.array(fs[-k:][::-1])
        if family == "BDF":
            s_alpha = m.alpha[1:] @ past_y
            pred = ys[j] if j == 0 else 2 * ys[j] - ys[j - 1]
            ys[j + 1], _ = bdf_step(
                problem.rhs,
                lambda t, y: _jacobian_operator(problem, t, y, lin.mode),
                times[j + 1],
                s_alpha,
                pred,
                h,
                m.beta_implicit,
                solver,
                error_weights(ys[j], ys[j], 1e-12, 1e-12),
                newton,
            )
        else:
            J = _jacobian_operator(problem, times[j], ys[j], lin.mode)
            ft = None if problem.autonomous else _time_derivative(problem, times[j], ys[j], fs[-1])
            ys[j + 1] = limm_step_raw(past_y, past_f, m, h, J, solver, ft)
        fs.append(problem.rhs(times[j + 1], ys[j + 1]))
        if len(fs) > k:
            fs.pop(0)
    return Trajectory(times, ys)


def reference_solution(problem: OdeProblem, n_steps: int) -> np.ndarray:
    """Final state from RK4 with ``n_steps`` uniform steps (an independent oracle)."""
    t0, tf = problem.t_span
    return rk4(problem.rhs, t0, problem.y0, tf, n_steps)


def relative_error(y, ref) -> float:
    """``||y - ref||_2 / ||ref||_2``."""
    ref = np.asarray(ref, dtype=float)
    return float(np.linalg.norm(np.asarray(y) - ref) / np.linalg.norm(ref))
