"""Divided-difference history of accepted solution and right-hand-side values.

``y_diffs[j]`` holds ``delta^j y[t_n, ..., t_{n-j}]`` (Newton form over the
most recent grid points, newest first) and ``f_diffs[j]`` the same for
``f``.  A new accepted point is folded in with the recurrence

    e_0 = y_new,   e_j = (e_{j-1} - delta^{j-1} y[t_n..t_{n-j+1}]) / (t_new - t_{n-j+1}),

which never revisits raw values.  The oldest difference falls off once the
capacity is reached, so memory does not grow with the number of steps.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .coeffs import fractions_from_times
from .errors import DegenerateGridError


def newton_coefficients(times, values) -> np.ndarray:
    """All leading divided differences ``delta^j v[t_0, ..., t_j]``.

    Parameters
    ----------
    times : array_like, shape (m,)
        Distinct abscissae in any order.
    values : array_like, shape (m,) or (m, N)

    Returns
    -------
    ndarray
        Same shape as ``values``; row ``j`` is ``delta^j v[t_0..t_j]``.
    """
    t = np.asarray(times, dtype=float)
    c = np.array(values, dtype=float)
    if c.shape[0] != t.size:
        raise ValueError("times and values differ in length")
    if np.unique(t).size != t.size:
        raise DegenerateGridError("divided differences need distinct times")
    shape = (-1,) + (1,) * (c.ndim - 1)
    for j in range(1, t.size):
        c[j:] = (c[j:] - c[j - 1 : -1]) / (t[j:] - t[: t.size - j]).reshape(shape)
    return c


def divided_difference(points) -> np.ndarray:
    """``delta^m v`` over all ``m + 1`` given ``(t, v)`` pairs, by the recursive definition."""
    points = list(points)
    if not points:
        raise ValueError("need at least one point")
    ts = [float(p[0]) for p in points]
    if len(set(ts)) != len(ts):
        raise DegenerateGridError("divided differences need distinct times")
    vals = [np.asarray(p[1], dtype=float) for p in points]

    def rec(i, j):
        if i == j:
            return vals[i]
        return (rec(i, j - 1) - rec(i + 1, j)) / (ts[i] - ts[j])

    return rec(0, len(points) - 1)


def newton_eval(times, diffs, x) -> np.ndarray:
    """Evaluate the Newton polynomial ``sum_j diffs[j] prod_{l<j} (x - times[l])``."""
    m = len(diffs)
    p = np.array(diffs[m - 1], dtype=float)
    for j in range(m - 2, -1, -1):
        p = diffs[j] + (x - times[j]) * p
    return p


@dataclass(frozen=True)
class DifferenceHistory:
    """Newton-form history.

    Attributes
    ----------
    times : ndarray
        ``t_n, t_{n-1}, ...`` strictly decreasing; may start with virtual
        points produced by :func:`bootstrap` or :meth:`resample`.
    y_diffs : ndarray, shape (len(times), N)
    f_diffs : ndarray, shape (<= f_capacity, N)
        Differences of ``f`` over the leading ``times``.
    k_current : int
        Order the integrator is currently using.
    n_real : int
        Number of accepted (non-virtual) points in ``times``.
    y_capacity, f_capacity : int
        Maximum number of stored differences.
    """

    times: np.ndarray
    y_diffs: np.ndarray
    f_diffs: np.ndarray
    k_current: int = 1
    n_real: int = 1
    y_capacity: int = 7
    f_capacity: int = 5

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if np.any(np.diff(t) >= 0):
            raise DegenerateGridError("history times must decrease strictly")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "y_diffs", np.atleast_2d(np.asarray(self.y_diffs, dtype=float)))
        object.__setattr__(self, "f_diffs", np.atleast_2d(np.asarray(self.f_diffs, dtype=float)))
        if self.y_diffs.shape[0] != t.size:
            raise ValueError("need one y difference per stored time")
        if self.f_diffs.shape[0] > t.size:
            raise ValueError("more f differences than stored times")

    @classmethod
    def from_points(cls, times, ys, fs, k_max: int = 5, k_current: int = 1) -> "DifferenceHistory":
        """History built directly from raw accepted points (newest first)."""
        y_cap, f_cap = k_max + 2, k_max
        times = np.asarray(times, dtype=float)[:y_cap]
        ys = np.asarray(ys, dtype=float)[:y_cap]
        fs = np.asarray(fs, dtype=float)[: min(f_cap, times.size)]
        return cls(
            times,
            newton_coefficients(times, ys),
            newton_coefficients(times[: fs.shape[0]], fs),
            k_current=k_current,
            n_real=times.size,
            y_capacity=y_cap,
            f_capacity=f_cap,
        )

    @property
    def t(self) -> float:
        return float(self.times[0])

    @property
    def y(self) -> np.ndarray:
        return self.y_diffs[0]

    @property
    def f(self) -> np.ndarray:
        return self.f_diffs[0]

    @property
    def n_points(self) -> int:
        return self.times.size

    def candidate_differences(self, t_new: float, y_new) -> np.ndarray:
        """``delta^j y[t_new, t_n, ..., t_{n-j+1}]`` for ``j = 0..n_points``.

        Pure: the history is not modified.  Row ``k+1`` is what the error
        estimator needs for an order-``k`` step.
        """
        return _extend(self.times, self.y_diffs, t_new, y_new)

    def append(self, t_new: float, y_new, f_new, k_current: int | None = None) -> "DifferenceHistory":
        return append_accepted(self, t_new, y_new, f_new, k_current)

    def with_order(self, k: int) -> "DifferenceHistory":
        return replace(self, k_current=int(k))

    def evaluate(self, t: float, degree: int | None = None) -> np.ndarray:
        """Newton interpolant of ``y`` through the newest ``degree + 1`` points."""
        m = self.n_points if degree is None else min(degree + 1, self.n_points)
        return newton_eval(self.times, self.y_diffs[:m], t)

    def fractions(self, h_next: float, k: int):
        """Stepsize fractions ``c_{-1} .. c_{k-1}`` for a step of size ``h_next``."""
        return fractions_from_times(self.times[:k], h_next)

    def resample(self, h_new: float) -> "DifferenceHistory":
        """Re-express the history on the uniform grid ``t_n - j h_new``.

        The Newton interpolants of ``y`` and ``f`` through all stored points
        are evaluated on the new grid and differenced again.  Used when the
        real grid would give inadmissible stepsize fractions.
        """
        if h_new <= 0:
            raise ValueError("h_new must be positive")
        m = self.n_points
        grid = self.times[0] - h_new * np.arange(m)
        ys = np.array([self.evaluate(x) for x in grid])
        mf = self.f_diffs.shape[0]
        fs = np.array([newton_eval(self.times, self.f_diffs, x) for x in grid[:mf]])
        return replace(
            self,
            times=grid,
            y_diffs=newton_coefficients(grid, ys),
            f_diffs=newton_coefficients(grid[:mf], fs),
        )


def _extend(times, diffs, t_new, v_new) -> np.ndarray:
    m = diffs.shape[0]
    e = np.empty((m + 1,) + diffs.shape[1:])
    e[0] = v_new
    for j in range(1, m + 1):
        e[j] = (e[j - 1] - diffs[j - 1]) / (t_new - times[j - 1])
    return e


def append_accepted(
    hist: DifferenceHistory, t_new: float, y_new, f_new, k_current: int | None = None
) -> DifferenceHistory:
    """Fold an accepted point into the history and return the new history.

    Raises
    ------
    DegenerateGridError
        If ``t_new`` does not exceed the newest stored time.
    """
    if not t_new > hist.times[0]:
        raise DegenerateGridError(f"new time {t_new} must exceed {hist.times[0]}")
    y_new = np.asarray(y_new, dtype=float)
    f_new = np.asarray(f_new, dtype=float)
    ey = _extend(hist.times, hist.y_diffs, t_new, y_new)[: hist.y_capacity]
    ef = _extend(hist.times, hist.f_diffs, t_new, f_new)[: hist.f_capacity]
    times = np.concatenate(([t_new], hist.times))[: hist.y_capacity]
    return replace(
        hist,
        times=times,
        y_diffs=ey,
        f_diffs=ef,
        k_current=hist.k_current if k_current is None else int(k_current),
        n_real=min(hist.n_real + 1, times.size),
    )


def bootstrap(problem, y0, h0: float, f0=None, jvp=None, t0: float | None = None, k_max: int = 5):
    """History at the initial point, seeded for an order-one first step.

    The initial point carries a virtual uniform back-grid ``t0 - h0``,
    ``t0 - 2 h0`` with ``delta^1 y = f0`` and ``delta^2 y = y''(t0) / 2``,
    where ``y'' = J0 f0 + f_t``.  Appending ``y1`` at ``t0 + h0`` then gives

        delta^2 y = ((y1 - y0)/h0 - f0) / (2 h0),
        delta^3 y = (delta^2 y - y''(t0)/2) / (3 h0).

    Parameters
    ----------
    problem : OdeProblem
    y0 : array_like
    h0 : float
        First step; sets the spacing of the virtual grid.
    f0 : array_like, optional
        ``f(t0, y0)`` if already evaluated.
    jvp : callable, optional
        ``jvp(t, y, v) -> J v``; defaults to ``problem.jvp``.
    """
    if h0 <= 0:
        raise ValueError("h0 must be positive")
    t0 = problem.t_span[0] if t0 is None else float(t0)
    y0 = np.asarray(y0, dtype=float)
    f0 = problem.rhs(t0, y0) if f0 is None else np.asarray(f0, dtype=float)
    jvp = jvp or problem.jvp
    ypp = jvp(t0, y0, f0)
    if not problem.autonomous:
        ypp = ypp + _time_derivative(problem, t0, y0, f0)
    times = t0 - h0 * np.arange(3)
    y_diffs = np.stack([y0, f0, 0.5 * ypp])
    f_diffs = np.stack([f0, ypp])
    return DifferenceHistory(
        times, y_diffs, f_diffs[: min(2, k_max)], k_current=1, n_real=1, y_capacity=k_max + 2, f_capacity=k_max
    )


def _time_derivative(problem, t, y, f0):
    if problem.dfdt is not None:
        return problem.dfdt(t, y)
    eps = np.sqrt(np.finfo(float).eps) * max(1.0, abs(t))
    return (problem.rhs(t + eps, y) - f0) / eps
