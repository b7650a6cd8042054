"""Linear algebra behind every step: dense LU and restarted GMRES.

All steppers solve systems with the shifted matrix ``I - h gamma J``.  In
direct mode the factorization is cached and reused while ``(h, gamma, J)``
stay the same; in GMRES mode only products ``J v`` are needed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, SingularMatrixError

MODES = ("direct", "gmres")
_MODE_ALIASES = {"direct": "direct", "direct-lu": "direct", "lu": "direct", "gmres": "gmres"}


@dataclass(frozen=True)
class LinearOperator:
    """``v -> A v`` with an optional explicit matrix (dense array or scipy sparse)."""

    dimension: int
    apply: Callable[[np.ndarray], np.ndarray]
    dense_matrix: Optional[object] = None

    @classmethod
    def from_matrix(cls, A) -> "LinearOperator":
        if not sp.issparse(A):
            A = np.atleast_2d(np.asarray(A, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"matrix must be square, got {A.shape}")
        return cls(A.shape[0], lambda v: A @ v, A)

    @classmethod
    def identity(cls, n: int) -> "LinearOperator":
        return cls(n, lambda v: np.array(v, dtype=float), np.eye(n))

    @classmethod
    def zero(cls, n: int) -> "LinearOperator":
        return cls(n, lambda v: np.zeros(n), np.zeros((n, n)))


@dataclass(frozen=True)
class LinearSolveConfig:
    """How shifted systems are solved.

    ``gmres_tol`` is relative to ``||b||_2``; ``max_iterations`` counts
    Arnoldi steps over all restarts.
    """

    mode: str = "direct"
    gmres_tol: float = 1e-8
    restart: int = 30
    max_iterations: int = 100

    def __post_init__(self):
        mode = _MODE_ALIASES.get(str(self.mode).lower())
        if mode is None:
            raise ValueError(f"unknown linear solve mode {self.mode!r}")
        object.__setattr__(self, "mode", mode)
        if not self.gmres_tol > 0:
            raise ValueError("gmres_tol must be positive")
        if self.restart < 1 or self.max_iterations < 1:
            raise ValueError("restart and max_iterations must be at least 1")


@dataclass(frozen=True)
class LUFactors:
    """Row-pivoted factors ``P A = L U``; sparse matrices use SuperLU."""

    factors: object
    sparse: bool = False

    def solve(self, b) -> np.ndarray:
        return lu_solve(self, b)


def lu_factor(A) -> LUFactors:
    """LU factorization with partial pivoting.

    Raises
    ------
    SingularMatrixError
        If a pivot is exactly zero; ``column`` names the first such column
        (``-1`` when the sparse factorization does not report it).
    """
    if sp.issparse(A):
        try:
            return LUFactors(spla.splu(sp.csc_matrix(A)), sparse=True)
        except RuntimeError as exc:
            raise SingularMatrixError(-1) from exc
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got shape {A.shape}")
    with warnings.catch_warnings():
        # an exact zero pivot is reported below as SingularMatrixError
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=False)
    zero = np.flatnonzero(np.diag(lu) == 0.0)
    if zero.size:
        raise SingularMatrixError(int(zero[0]))
    return LUFactors((lu, piv))


def lu_solve(factors: LUFactors, b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if factors.sparse:
        return factors.factors.solve(b)
    return sla.lu_solve(factors.factors, b, check_finite=False)


@dataclass(frozen=True)
class GmresResult:
    x: np.ndarray
    iterations: int
    residual_norm: float


def gmres(op: LinearOperator, b, cfg: LinearSolveConfig | None = None, x0=None) -> GmresResult:
    """Restarted GMRES without preconditioning.

    Arnoldi uses modified Gram-Schmidt followed by one reorthogonalization
    pass; the least-squares problem is updated with Givens rotations.

    Raises
    ------
    ConvergenceError
        When ``max_iterations`` Arnoldi steps do not reach
        ``||A x - b|| <= gmres_tol ||b||``; ``best`` holds the last iterate.
    """
    cfg = cfg or LinearSolveConfig(mode="gmres")
    b = np.asarray(b, dtype=float)
    n = b.size
    if op.dimension != n:
        raise ValueError(f"operator dimension {op.dimension} does not match rhs length {n}")
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return GmresResult(np.zeros(n), 0, 0.0)
    target = cfg.gmres_tol * bnorm
    total = 0
    r = b - op.apply(x)
    beta = np.linalg.norm(r)
    while True:
        if beta <= target:
            return GmresResult(x, total, float(beta))
        if total >= cfg.max_iterations:
            raise ConvergenceError(
                f"GMRES did not converge in {total} iterations (residual {beta:.3e}, target {target:.3e})",
                best=x,
                residual=float(beta),
            )
        m = min(cfg.restart, cfg.max_iterations - total)
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        cs, sn = np.zeros(m), np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        j_used = 0
        for j in range(m):
            w = op.apply(V[j])
            for _ in range(2):
                for i in range(j + 1):
                    d = V[i] @ w
                    H[i, j] += d
                    w = w - d * V[i]
            H[j + 1, j] = np.linalg.norm(w)
            breakdown = H[j + 1, j] <= 1e-14 * max(1.0, np.abs(H[: j + 1, j]).max())
            if not breakdown:
                V[j + 1] = w / H[j + 1, j]
            for i in range(j):
                hi = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = hi
            denom = np.hypot(H[j, j], H[j + 1, j])
            cs[j], sn[j] = H[j, j] / denom, H[j + 1, j] / denom
            H[j, j] = denom
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            total += 1
            j_used = j + 1
            if abs(g[j + 1]) <= target or breakdown:
                break
        y = sla.solve_triangular(H[:j_used, :j_used], g[:j_used])
        x = x + V[:j_used].T @ y
        r = b - op.apply(x)
        beta = np.linalg.norm(r)


class ShiftedSolver:
    """Solves ``(I - h gamma J) z = rhs`` and caches the factorization.

    The cache key is the identity of the Jacobian operator together with
    ``h`` and ``gamma``; building a new operator (a fresh Jacobian) forces a
    new factorization.  Counters expose the work done.
    """

    def __init__(self, cfg: LinearSolveConfig | None = None):
        self.cfg = cfg or LinearSolveConfig()
        self.n_factorizations = 0
        self.n_solves = 0
        self.n_gmres_iterations = 0
        self._key = None
        self._op = None
        self._factors = None

    def invalidate(self) -> None:
        self._key = self._op = self._factors = None

    def _factor(self, J: LinearOperator, h: float, gamma: float) -> LUFactors:
        if self._op is J and self._key == (h, gamma):
            return self._factors
        A = J.dense_matrix
        if A is None:
            raise ValueError("direct mode needs an explicit Jacobian matrix")
        if sp.issparse(A):
            M = sp.identity(J.dimension, format="csc") - (h * gamma) * A
        else:
            M = np.eye(J.dimension) - (h * gamma) * np.asarray(A)
        factors = lu_factor(M)
        self.n_factorizations += 1
        self._op, self._key, self._factors = J, (h, gamma), factors
        return factors

    def solve(self, J: LinearOperator, h: float, gamma: float, rhs, x0=None) -> np.ndarray:
        if h <= 0:
            raise ValueError("h must be positive")
        rhs = np.asarray(rhs, dtype=float)
        self.n_solves += 1
        if self.cfg.mode == "direct":
            return lu_solve(self._factor(J, h, gamma), rhs)
        s = h * gamma
        op = LinearOperator(J.dimension, lambda v: v - s * J.apply(v))
        res = gmres(op, rhs, self.cfg, x0)
        self.n_gmres_iterations += res.iterations
        return res.x


def solve_shifted(jacobian_op: LinearOperator, h: float, mu_minus1: float, rhs, cfg=None, solver=None):
    """One solve with ``I - h mu_{-1} J``; pass ``solver`` to share its cache."""
    solver = solver or ShiftedSolver(cfg)
    return solver.solve(jacobian_op, h, mu_minus1, rhs)
