"""Method coefficients, order conditions and error constants.

Coefficient arrays follow the step-index convention ``i = -1, 0, ..., k-1``
and are stored with an offset of one: ``alpha[0]`` is ``alpha_{-1}``,
``alpha[1]`` is ``alpha_0`` and so on.  Stepsize fractions use the same
offset, ``c[0] = c_{-1} = -1`` and ``c[1] = c_0 = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _tables
from .errors import DegenerateGridError, InadmissibleFractionsError, NotAvailableError

FAMILIES = ("LIMM", "LIMM-W", "BDF")
MAX_ORDER = 5

_ALIASES = {
    "limm": "LIMM",
    "limm-w": "LIMM-W",
    "limmw": "LIMM-W",
    "limm_w": "LIMM-W",
    "bdf": "BDF",
}


def canonical_family(family: str) -> str:
    """Map user spellings such as ``"limmw"`` onto ``"LIMM-W"``."""
    try:
        return _ALIASES[family.strip().lower()]
    except KeyError:
        raise NotAvailableError(f"unknown method family {family!r}") from None


@dataclass(frozen=True)
class MethodCoefficients:
    """One k-step method.

    Attributes
    ----------
    family : str
        ``"LIMM"``, ``"LIMM-W"`` or ``"BDF"``.
    k : int
        Number of steps; the order equals ``k`` for every family here.
    alpha : ndarray, shape (k+1,)
        ``alpha_{-1} .. alpha_{k-1}`` with ``alpha_{-1} = 1``.
    beta : ndarray, shape (k,)
        Explicit weights ``beta_0 .. beta_{k-1}``.
    mu : ndarray, shape (k+1,)
        Jacobian weights ``mu_{-1} .. mu_{k-1}``; zero for BDF.
    beta_implicit : float
        ``beta_{-1}``.  Zero for the linearly implicit families, the
        implicit BDF weight otherwise.
    """

    family: str
    k: int
    alpha: np.ndarray
    beta: np.ndarray
    mu: np.ndarray
    beta_implicit: float = 0.0
    c: np.ndarray | None = field(default=None, compare=False, repr=False)

    @property
    def order(self) -> int:
        return self.k

    @property
    def beta_full(self) -> np.ndarray:
        """``beta_{-1} .. beta_{k-1}`` including the implicit weight."""
        return np.concatenate(([self.beta_implicit], self.beta))

    @property
    def mu_minus1(self) -> float:
        return float(self.mu[0])

    @property
    def implicit_weight(self) -> float:
        """Scalar multiplying ``h J`` in the linear system of one step."""
        return float(self.mu[0] + self.beta_implicit)

    def scaled(self, factor: float) -> "MethodCoefficients":
        """Return the same method with every coefficient multiplied by ``factor``."""
        return MethodCoefficients(
            self.family,
            self.k,
            self.alpha * factor,
            self.beta * factor,
            self.mu * factor,
            self.beta_implicit * factor,
            self.c,
        )


@dataclass(frozen=True)
class StepsizeFractions:
    """Past grid points as multiples of the upcoming step.

    ``t_{n-i} = t_n - c_i h_n`` for ``i = -1 .. k``.  ``c`` is stored with
    the usual offset, so ``c[0] = -1`` and ``c[1] = 0``.
    """

    c: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        object.__setattr__(self, "c", c)
        if c.ndim != 1 or c.size < 2:
            raise DegenerateGridError("need at least c_{-1} and c_0")
        if c[0] != -1.0 or c[1] != 0.0:
            raise DegenerateGridError("c_{-1} must be -1 and c_0 must be 0")
        if np.any(np.diff(c[1:]) <= 0.0):
            raise DegenerateGridError(f"fractions must increase strictly: {c[1:]}")

    @property
    def k(self) -> int:
        """Largest index available, i.e. ``c`` runs up to ``c_k``."""
        return self.c.size - 2

    def __getitem__(self, i):
        return self.c[i + 1]


def uniform_fractions(k: int) -> StepsizeFractions:
    return StepsizeFractions(np.arange(-1.0, k + 1.0))


def fractions_from_times(t_history, h_next: float) -> StepsizeFractions:
    """Build ``c`` from past grid times.

    Parameters
    ----------
    t_history : sequence of float
        ``t_n, t_{n-1}, ..., t_{n-k}``, strictly decreasing.
    h_next : float
        The step about to be taken from ``t_n``.
    """
    t = np.asarray(t_history, dtype=float)
    if h_next <= 0.0:
        raise DegenerateGridError("h_next must be positive")
    if np.any(np.diff(t) >= 0.0):
        raise DegenerateGridError("time history must be strictly decreasing")
    c = np.empty(t.size + 1)
    c[0] = -1.0
    c[1:] = (t[0] - t) / h_next
    return StepsizeFractions(c)


def check_admissible(c: StepsizeFractions, k: int) -> None:
    """Raise unless ``|c_i - i| <= i/2`` for ``i = 1 .. k-1``.

    Inside this band the variable-step systems are comfortably solvable and
    the coefficients stay close to their fixed-step values.
    """
    if c.k < k - 1:
        raise DegenerateGridError(f"need c up to c_{k - 1}, got c_{c.k}")
    i = np.arange(1, k)
    dev = np.abs(c.c[2 : k + 1] - i)
    if np.any(dev > 0.5 * i + 1e-12):
        raise InadmissibleFractionsError(f"fractions {c.c[2:k + 1]} outside admissible band")


def is_admissible(c: StepsizeFractions, k: int) -> bool:
    try:
        check_admissible(c, k)
    except DegenerateGridError:
        return False
    return True


def random_admissible_fractions(rng: np.random.Generator, k: int, spread: float = 0.45) -> StepsizeFractions:
    """Random strictly increasing ``c_1 .. c_k`` with ``|c_i - i| <= spread * i``.

    ``spread`` must not exceed 0.5 so the draws stay inside the admissible
    band; draws that are not increasing are redrawn.
    """
    if not 0.0 <= spread <= 0.5:
        raise ValueError("spread must lie in [0, 0.5]")
    i = np.arange(1.0, k + 1.0)
    while True:
        ci = i * (1.0 + rng.uniform(-spread, spread, size=k))
        if np.all(np.diff(np.concatenate(([0.0], ci))) > 0):
            return StepsizeFractions(np.concatenate(([-1.0, 0.0], ci)))


def _fractions(values):
    return [Fraction(v) for v in values]


_FIXED_CACHE: dict[tuple[str, int], MethodCoefficients] = {}


def fixed_coefficients(family: str, k: int) -> MethodCoefficients:
    """Tabulated fixed-step method of ``k`` steps."""
    family = canonical_family(family)
    key = (family, k)
    if key in _FIXED_CACHE:
        return _FIXED_CACHE[key]
    table = {"LIMM": _tables.LIMM, "LIMM-W": _tables.LIMMW, "BDF": _tables.BDF}[family]
    if k not in table:
        raise NotAvailableError(f"no {family} method with k={k}")
    d = table[k]
    alpha = np.array([float(x) for x in _fractions(d["alpha"])])
    if family == "BDF":
        beta = np.zeros(k)
        mu = np.zeros(k + 1)
        beta_implicit = float(Fraction(d["beta_implicit"]))
    else:
        b = [float(x) for x in _fractions(d["beta"])]
        beta_implicit, beta = b[0], np.array(b[1:])
        mu = np.array([float(x) for x in _fractions(d["mu"])])
    m = MethodCoefficients(family, k, alpha, beta, mu, beta_implicit, uniform_fractions(k).c)
    _FIXED_CACHE[key] = m
    return m


def _powers(c: np.ndarray, ell: int) -> np.ndarray:
    # 0**0 == 1 is intended
    return c**ell if ell >= 0 else np.zeros_like(c)


def variable_coefficients(
    family: str, k: int, c: StepsizeFractions, check: bool = True
) -> MethodCoefficients:
    """Coefficients of the k-step method on a non-uniform grid.

    For LIMM and LIMM-W every ``alpha`` (and for LIMM also ``beta_0``) keeps
    its tabulated value; the remaining ``beta`` and ``mu`` are the unique
    solution of the order conditions together with ``sigma(0) = 0``.  BDF
    coefficients come from the classical interpolation conditions.

    ``check=False`` skips the admissible-band guard (the systems stay
    solvable for any distinct fractions); it exists for diagnostics that
    replay arbitrary grids.
    """
    family = canonical_family(family)
    if not 1 <= k <= MAX_ORDER:
        raise NotAvailableError(f"no {family} method with k={k}")
    if check:
        check_admissible(c, k)
    elif c.k < k - 1:
        raise DegenerateGridError(f"need c up to c_{k - 1}, got c_{c.k}")
    cc = c.c[: k + 1]  # c_{-1} .. c_{k-1}
    if family == "BDF":
        return _bdf_variable(k, cc)
    fixed = fixed_coefficients(family, k)
    alpha = fixed.alpha.copy()
    if family == "LIMM-W":
        beta = _solve_beta(alpha, cc, free=range(0, k), ells=range(1, k + 1))
        mu_ells = range(1, k + 1)
        combined = False
    else:
        beta = np.empty(k)
        beta[0] = fixed.beta[0]
        ells = [1] + list(range(3, k + 1))
        beta[1:] = _solve_beta(alpha, cc, free=range(1, k), ells=ells, beta0=beta[0])[1:]
        mu_ells = [1] + list(range(3, k + 1))
        combined = k >= 2
    mu = _solve_mu(alpha, beta, cc, mu_ells, combined)
    return MethodCoefficients(family, k, alpha, beta, mu, 0.0, c.c.copy())


def _solve_beta(alpha, cc, free, ells, beta0=0.0):
    """Solve the classical conditions for the free explicit weights.

    Returns the full ``beta_0 .. beta_{k-1}`` vector.
    """
    k = cc.size - 1
    free = list(free)
    ells = list(ells)
    beta = np.zeros(k)
    beta[0] = beta0
    if not free:
        return beta
    cb = cc[1:]  # c_0 .. c_{k-1}
    A = np.empty((len(ells), len(free)))
    rhs = np.empty(len(ells))
    fixed = [i for i in range(k) if i not in free]
    for r, ell in enumerate(ells):
        A[r] = ell * _powers(cb[free], ell - 1)
        rhs[r] = -alpha @ cc**ell - sum(ell * beta[i] * cb[i] ** (ell - 1) for i in fixed)
    beta[free] = np.linalg.solve(A, rhs)
    return beta


def _solve_mu(alpha, beta, cc, ells, combined):
    k = cc.size - 1
    rows, rhs = [], []
    for ell in ells:
        rows.append(_powers(cc, ell - 1))
        rhs.append(0.0)
    if combined:
        # LIMM second order: the mu part only has to cancel what alpha, beta leave
        rows.append(2.0 * cc)
        rhs.append(-(alpha @ cc**2) - 2.0 * (beta @ cc[1:]))
    sigma0 = np.zeros(k + 1)
    sigma0[k] = 1.0
    rows.append(sigma0)
    rhs.append(-beta[k - 1])
    return np.linalg.solve(np.array(rows), np.array(rhs))


def _bdf_variable(k, cc):
    # unknowns alpha_0..alpha_{k-1}, beta_{-1}; alpha_{-1} = 1
    A = np.zeros((k + 1, k + 1))
    rhs = np.zeros(k + 1)
    for ell in range(0, k + 1):
        A[ell, :k] = _powers(cc[1:], ell)
        if ell >= 1:
            A[ell, k] = ell * (-1.0) ** (ell - 1)
        rhs[ell] = -((-1.0) ** ell)
    sol = np.linalg.solve(A, rhs)
    alpha = np.concatenate(([1.0], sol[:k]))
    return MethodCoefficients("BDF", k, alpha, np.zeros(k), np.zeros(k + 1), float(sol[k]), cc.copy())


def _c_array(m: MethodCoefficients, c: StepsizeFractions | None) -> np.ndarray:
    if c is None:
        return np.arange(-1.0, m.k)
    return np.asarray(c.c[: m.k + 1], dtype=float)


def order_residuals(m: MethodCoefficients, c: StepsizeFractions | None, ell: int):
    """Residuals of the order-``ell`` conditions.

    ``rho_a = sum alpha c^ell + ell sum beta c^(ell-1)`` (the sum includes
    ``beta_{-1}``, which is nonzero only for BDF) and
    ``rho_b = ell sum mu c^(ell-1)``.
    """
    if ell < 1:
        raise ValueError("ell must be at least 1")
    cc = _c_array(m, c)
    rho_a = m.alpha @ cc**ell + ell * (m.beta_full @ _powers(cc, ell - 1))
    rho_b = ell * (m.mu @ _powers(cc, ell - 1))
    return float(rho_a), float(rho_b)


def error_constant(m: MethodCoefficients, c: StepsizeFractions | None = None, normalized: bool = True) -> float:
    """Error constant from the residuals of the first unsatisfied conditions.

    With ``normalized=True`` BDF is reported in the classical normalisation
    (divided by ``sigma(1) = beta_{-1}``), which is how its constants are
    usually quoted.  The local error of ``y_{n+1}`` itself (``alpha_{-1} = 1``)
    uses ``normalized=False``.
    """
    rho_a, rho_b = order_residuals(m, c, m.k + 1)
    const = max(abs(rho_a), abs(rho_a + rho_b)) / math.factorial(m.k + 1)
    if normalized and m.family == "BDF":
        const /= m.beta_implicit
    return const


def condition_residuals(m: MethodCoefficients, c: StepsizeFractions | None = None, p: int | None = None):
    """All order-condition residuals as a list of ``(name, ell, value)``.

    LIMM-W and BDF are checked against the Jacobian-independent conditions;
    LIMM uses the combined second-order condition and split conditions
    from order three on.
    """
    p = m.k if p is None else p
    out = [("alpha-sum", 0, float(m.alpha.sum())), ("mu-sum", 0, float(m.mu.sum()))]
    for ell in range(1, p + 1):
        ra, rb = order_residuals(m, c, ell)
        if m.family == "LIMM" and ell == 2:
            out.append(("combined", 2, ra + rb))
        else:
            out.append(("classical", ell, ra))
            if ell >= 2:
                out.append(("mu", ell, rb))
    return out


def verify_order_conditions(m: MethodCoefficients, c: StepsizeFractions | None = None, p: int | None = None) -> float:
    """Largest absolute residual over every applicable order condition."""
    return max(abs(v) for _, _, v in condition_residuals(m, c, p))


def transformed_coefficients(m: MethodCoefficients, c: StepsizeFractions | None = None):
    """Coefficients for the divided-difference form of a step.

    Returns ``(alpha_hat, beta_hat, mu_hat)``, each of length ``k``, such that
    ``sum_j alpha_j y_{n-j} = sum_i h^i alpha_hat_i delta^i y[t_n..t_{n-i}]``
    and likewise for ``beta`` (on f) and ``mu``.
    """
    k = m.k
    cc = _c_array(m, c)[1:]  # c_0 .. c_{k-1}
    # P[i, j] = (-1)^i prod_{l=0}^{i-1} (c_j - c_l)
    P = np.zeros((k, k))
    for j in range(k):
        prod = 1.0
        for i in range(k):
            if i > 0:
                prod *= -(cc[j] - cc[i - 1])
            P[i, j] = prod
    return P @ m.alpha[1:], P @ m.beta, P @ m.mu[1:]
