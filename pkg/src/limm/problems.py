"""ODE problem container and the benchmark corpus.

Every problem is an autonomous or non-autonomous system ``y' = f(t, y)`` on
``[t0, tF]``.  Jacobian information is optional: ``jacobian`` returns the
dense ``N x N`` matrix and ``jac_vec`` the product ``J v``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .errors import InvalidDimensionError

Vector = np.ndarray


@dataclass(frozen=True)
class OdeProblem:
    """An initial value problem ``y' = rhs(t, y)``, ``y(t0) = y0``.

    Attributes
    ----------
    name : str
        Registry name.
    t_span : tuple of float
        ``(t0, tF)`` with ``t0 < tF``.
    y0 : ndarray
        Initial state, length ``dimension``.
    rhs : callable
        ``rhs(t, y) -> ndarray``.
    jacobian : callable, optional
        ``jacobian(t, y) -> (N, N)`` array or scipy sparse matrix.
    jac_vec : callable, optional
        ``jac_vec(t, y, v) -> J v``.
    dfdt : callable, optional
        ``dfdt(t, y) -> partial f / partial t``.
    autonomous : bool
        True when ``rhs`` does not depend on ``t``.
    exact : callable, optional
        ``exact(t) -> y(t)`` when a closed form exists.
    params : dict
        Construction parameters, JSON-expressible.
    """

    name: str
    t_span: tuple
    y0: Vector
    rhs: Callable[[float, Vector], Vector]
    jacobian: Optional[Callable] = None
    jac_vec: Optional[Callable] = None
    dfdt: Optional[Callable] = None
    autonomous: bool = True
    exact: Optional[Callable[[float], Vector]] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        y0 = np.array(self.y0, dtype=float).reshape(-1)
        y0.setflags(write=False)
        object.__setattr__(self, "y0", y0)
        t0, tf = (float(x) for x in self.t_span)
        if not t0 < tf:
            raise ValueError(f"t_span must satisfy t0 < tF, got {self.t_span}")
        object.__setattr__(self, "t_span", (t0, tf))

    @property
    def dimension(self) -> int:
        return self.y0.size

    def with_span(self, t_span=None, y0=None) -> "OdeProblem":
        """Copy with a different time interval and/or initial state."""
        kw = {}
        if t_span is not None:
            kw["t_span"] = t_span
        if y0 is not None:
            kw["y0"] = y0
        return replace(self, **kw)

    def jvp(self, t, y, v) -> Vector:
        """``J(t, y) v`` from whichever Jacobian form is available."""
        if self.jac_vec is not None:
            return self.jac_vec(t, y, v)
        if self.jacobian is not None:
            return self.jacobian(t, y) @ v
        return fd_jvp(self.rhs, t, y, v)


def fd_jvp(rhs, t, y, v, f0=None) -> Vector:
    """Forward-difference directional derivative ``(f(y + eps v) - f(y)) / eps``."""
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return np.zeros_like(y)
    eps = np.sqrt(np.finfo(float).eps) * (1.0 + np.linalg.norm(y)) / nv
    if f0 is None:
        f0 = rhs(t, y)
    return (rhs(t, y + eps * v) - f0) / eps


def augment_time(problem: OdeProblem) -> OdeProblem:
    """Autonomous form with ``t`` appended as the last state component.

    The Jacobian gains the column ``f_t`` (from ``dfdt`` if present, else a
    forward difference) and a zero last row.  Dense Jacobians stay dense;
    sparse ones are extended with ``scipy.sparse``.
    """
    n = problem.dimension

    def split(z):
        return z[-1], z[:-1]

    def ft(t, y, f=None):
        if problem.dfdt is not None:
            return problem.dfdt(t, y)
        f = problem.rhs(t, y) if f is None else f
        eps = np.sqrt(np.finfo(float).eps) * max(1.0, abs(t))
        return (problem.rhs(t + eps, y) - f) / eps

    def rhs(_, z):
        t, y = split(z)
        return np.append(problem.rhs(t, y), 1.0)

    def jac_vec(_, z, v):
        t, y = split(z)
        return np.append(problem.jvp(t, y, v[:-1]) + v[-1] * ft(t, y), 0.0)

    def jacobian(_, z):
        t, y = split(z)
        J = problem.jacobian(t, y)
        col = ft(t, y)
        if sp.issparse(J):
            return sp.bmat([[J, col[:, None]], [None, sp.csr_matrix((1, 1))]], format="csr")
        out = np.zeros((n + 1, n + 1))
        out[:n, :n] = J
        out[:n, n] = col
        return out

    t0 = problem.t_span[0]
    exact = None
    if problem.exact is not None:
        exact = lambda t: np.append(problem.exact(t), t)  # noqa: E731
    return OdeProblem(
        name=problem.name,
        t_span=problem.t_span,
        y0=np.append(problem.y0, t0),
        rhs=rhs,
        jacobian=jacobian if problem.jacobian is not None else None,
        jac_vec=jac_vec,
        dfdt=lambda t, z: np.zeros(n + 1),
        autonomous=True,
        exact=exact,
        params=dict(problem.params, augmented=True),
    )


def fd_jacobian(rhs, t, y) -> np.ndarray:
    """Dense central-difference Jacobian, for testing."""
    n = y.size
    J = np.empty((n, n))
    for j in range(n):
        e = max(1e-6, 1e-6 * abs(y[j]))
        yp, ym = y.copy(), y.copy()
        yp[j] += e
        ym[j] -= e
        J[:, j] = (rhs(t, yp) - rhs(t, ym)) / (2 * e)
    return J


def dahlquist(lam=-1.0, t_span=(0.0, 1.0)) -> OdeProblem:
    """``y' = lambda y``, ``y(0) = 1``.

    A complex ``lambda = a + ib`` is realified to the 2x2 block
    ``[[a, -b], [b, a]]`` acting on ``(Re y, Im y)``, with ``y(0) = (1, 0)``.
    """
    lam = complex(lam)
    t0 = float(t_span[0])
    if lam.imag == 0.0:
        a = lam.real
        A = np.array([[a]])
        y0 = np.array([1.0])

        def exact(t):
            return np.array([np.exp(a * (t - t0))])

    else:
        a, b = lam.real, lam.imag
        A = np.array([[a, -b], [b, a]])
        y0 = np.array([1.0, 0.0])

        def exact(t):
            w = np.exp(lam * (t - t0))
            return np.array([w.real, w.imag])

    A.setflags(write=False)
    return OdeProblem(
        name="dahlquist",
        t_span=t_span,
        y0=y0,
        rhs=lambda t, y: A @ y,
        jacobian=lambda t, y: A.copy(),
        jac_vec=lambda t, y, v: A @ v,
        dfdt=lambda t, y: np.zeros_like(y),
        autonomous=True,
        exact=exact,
        params={"lam": lam.real if lam.imag == 0 else [lam.real, lam.imag]},
    )


def lorenz96_forcing(t):
    return 8.0 + 4.0 * np.cos(3.0 * np.pi * t)


def lorenz96(N: int = 40, t_span=(0.0, 0.5), y0=None) -> OdeProblem:
    """Lorenz-96 with time-dependent forcing ``F(t) = 8 + 4 cos(3 pi t)``.

    The default initial state is ``x_i = 8 + sin(2 pi i / N)``, a smooth
    wave around the mean forcing.
    """
    N = int(N)
    if N < 4:
        raise InvalidDimensionError(f"Lorenz-96 needs N >= 4, got {N}")
    if y0 is None:
        y0 = 8.0 + np.sin(2.0 * np.pi * np.arange(1, N + 1) / N)
    idx = np.arange(N)
    ip1, im1, im2 = (idx + 1) % N, (idx - 1) % N, (idx - 2) % N

    def rhs(t, x):
        return (x[ip1] - x[im2]) * x[im1] - x + lorenz96_forcing(t)

    def jacobian(t, x):
        J = np.zeros((N, N))
        J[idx, ip1] += x[im1]
        J[idx, im2] -= x[im1]
        J[idx, im1] += x[ip1] - x[im2]
        J[idx, idx] -= 1.0
        return J

    def jac_vec(t, x, v):
        return (v[ip1] - v[im2]) * x[im1] + (x[ip1] - x[im2]) * v[im1] - v

    def dfdt(t, x):
        return np.full(N, -12.0 * np.pi * np.sin(3.0 * np.pi * t))

    return OdeProblem(
        name="lorenz96",
        t_span=t_span,
        y0=y0,
        rhs=rhs,
        jacobian=jacobian,
        jac_vec=jac_vec,
        dfdt=dfdt,
        autonomous=False,
        params={"N": N},
    )


GS_EPS1, GS_EPS2, GS_F, GS_K = 0.2, 0.1, 0.04, 0.06


def periodic_laplacian(n: int) -> sp.csr_matrix:
    """5-point Laplacian on an ``n x n`` periodic grid of the unit square (spacing ``1/n``)."""
    e = np.ones(n)
    d1 = sp.diags([e[:-1], -2 * e, e[:-1]], [-1, 0, 1], shape=(n, n), format="lil")
    d1[0, n - 1] = 1.0
    d1[n - 1, 0] = 1.0
    d1 = d1.tocsr() * float(n * n)
    eye = sp.identity(n, format="csr")
    return (sp.kron(eye, d1) + sp.kron(d1, eye)).tocsr()


def _laplacian_apply(u, n):
    u = u.reshape(n, n)
    lap = np.roll(u, 1, 0) + np.roll(u, -1, 0) + np.roll(u, 1, 1) + np.roll(u, -1, 1) - 4.0 * u
    return lap.reshape(-1) * float(n * n)


def gray_scott_initial(n: int) -> Vector:
    """``u = 1, v = 0`` with a centred square of side ``n/4`` set to ``u = 0.5, v = 0.25``."""
    u = np.ones((n, n))
    v = np.zeros((n, n))
    w = max(n // 4, 1)
    lo = (n - w) // 2
    u[lo : lo + w, lo : lo + w] = 0.5
    v[lo : lo + w, lo : lo + w] = 0.25
    return np.concatenate([u.ravel(), v.ravel()])


def gray_scott(n: int = 128, t_span=(0.0, 2.0), y0=None, sparse_jacobian: bool = False) -> OdeProblem:
    """Gray-Scott reaction-diffusion on an ``n x n`` periodic grid.

    The state is ``(u, v)`` flattened row-major and stacked, ``N = 2 n^2``.
    ``jac_vec`` is always available.  ``jacobian`` returns a dense matrix
    for ``n <= 64``; with ``sparse_jacobian=True`` it returns a CSR matrix
    for any ``n``.
    """
    n = int(n)
    if n < 4:
        raise InvalidDimensionError(f"Gray-Scott needs n >= 4, got {n}")
    m = n * n
    if y0 is None:
        y0 = gray_scott_initial(n)
    lap = periodic_laplacian(n)

    def rhs(t, y):
        u, v = y[:m], y[m:]
        uvv = u * v * v
        du = GS_EPS1 * _laplacian_apply(u, n) - uvv + GS_F * (1.0 - u)
        dv = GS_EPS2 * _laplacian_apply(v, n) + uvv - (GS_F + GS_K) * v
        return np.concatenate([du, dv])

    def jac_vec(t, y, w):
        u, v = y[:m], y[m:]
        wu, wv = w[:m], w[m:]
        react = v * v * wu + 2.0 * u * v * wv
        du = GS_EPS1 * _laplacian_apply(wu, n) - react - GS_F * wu
        dv = GS_EPS2 * _laplacian_apply(wv, n) + react - (GS_F + GS_K) * wv
        return np.concatenate([du, dv])

    def sparse_jac(t, y):
        u, v = y[:m], y[m:]
        vv, uv2 = v * v, 2.0 * u * v
        return sp.bmat(
            [
                [GS_EPS1 * lap + sp.diags(-vv - GS_F), sp.diags(-uv2)],
                [sp.diags(vv), GS_EPS2 * lap + sp.diags(uv2 - (GS_F + GS_K))],
            ],
            format="csr",
        )

    if sparse_jacobian:
        jacobian = sparse_jac
    elif n <= 64:
        def jacobian(t, y):
            return sparse_jac(t, y).toarray()
    else:
        jacobian = None

    return OdeProblem(
        name="grayscott",
        t_span=t_span,
        y0=y0,
        rhs=rhs,
        jacobian=jacobian,
        jac_vec=jac_vec,
        dfdt=lambda t, y: np.zeros_like(y),
        autonomous=True,
        params={"n": n, "sparse_jacobian": bool(sparse_jacobian)},
    )


PROBLEMS = {
    "dahlquist": dahlquist,
    "lorenz96": lorenz96,
    "grayscott": gray_scott,
    "gray_scott": gray_scott,
}


def make_problem(name: str, params: dict | None = None) -> OdeProblem:
    """Build a registered problem from a JSON-style parameter map.

    ``dahlquist`` accepts ``lam`` as a number or a ``[re, im]`` pair.
    """
    key = name.strip().lower().replace("-", "")
    if key not in PROBLEMS:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(set(PROBLEMS) - {'gray_scott'})}")
    params = dict(params or {})
    if key == "dahlquist" and isinstance(params.get("lam"), (list, tuple)):
        re, im = params["lam"]
        params["lam"] = complex(re, im)
    if "t_span" in params:
        params["t_span"] = tuple(params["t_span"])
    return PROBLEMS[key](**params)
