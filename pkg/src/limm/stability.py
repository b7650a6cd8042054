"""Linear stability analysis of the multistep families.

Applying a method to ``y' = lambda y`` with ``z = h lambda`` gives the
difference equation ``sum_i (alpha_i - z (beta_i + mu_i)) y_{n-i} = 0``.
Its characteristic polynomials are ``rho(zeta) = sum alpha_i zeta^(k-i-1)``
and ``sigma(zeta) = sum (beta_i + mu_i) zeta^(k-i-1)``; the boundary of the
stability region is traced by ``z = rho / sigma`` on the unit circle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .coeffs import (
    MethodCoefficients,
    canonical_family,
    fractions_from_times,
    is_admissible,
    order_residuals,
    uniform_fractions,
    variable_coefficients,
)
from .errors import StabilityPoleError

A_STABLE_TOL = 1e-9
DEFAULT_SAMPLES = 8192


@dataclass(frozen=True)
class CharacteristicPolynomials:
    """Coefficients in descending powers of ``zeta`` (``numpy.polyval`` order)."""

    rho: np.ndarray
    sigma: np.ndarray
    upsilon: np.ndarray


@dataclass(frozen=True)
class RootLocus:
    """``z(theta) = rho(e^{i theta}) / sigma(e^{i theta})``.

    Samples where ``sigma`` vanishes are stored as ``nan`` and excluded from
    the angle search.
    """

    theta: np.ndarray
    z: np.ndarray

    @property
    def samples(self):
        return list(zip(self.theta, self.z))

    @property
    def finite(self) -> np.ndarray:
        return np.isfinite(self.z)


def characteristic_polynomials(m: MethodCoefficients) -> CharacteristicPolynomials:
    return CharacteristicPolynomials(
        rho=m.alpha.astype(float).copy(),
        sigma=m.beta_full + m.mu,
        upsilon=np.zeros(m.k),
    )


def _z_of_theta(polys: CharacteristicPolynomials, theta):
    zeta = np.exp(1j * np.asarray(theta, dtype=float))
    num = np.polyval(polys.rho, zeta)
    den = np.polyval(polys.sigma, zeta)
    tiny = np.abs(den) <= 1e-14 * max(1.0, np.max(np.abs(polys.sigma)))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = num / den
    return np.where(tiny, np.nan + 0j, z)


def root_locus(m: MethodCoefficients, n_samples: int = DEFAULT_SAMPLES) -> RootLocus:
    """Sample the boundary locus at ``n_samples`` equally spaced angles in ``[0, 2 pi)``."""
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    theta = 2.0 * np.pi * np.arange(n_samples) / n_samples
    return RootLocus(theta, _z_of_theta(characteristic_polynomials(m), theta))


def _angle_from_negative_axis(z):
    """``|arg(-z)|`` in degrees; nan at the origin and at infinity."""
    z = np.asarray(z)
    out = np.degrees(np.abs(np.angle(-z)))
    return np.where(np.isfinite(z) & (np.abs(z) > 1e-12), out, np.nan)


def is_a_stable(m: MethodCoefficients, n_samples: int = DEFAULT_SAMPLES) -> bool:
    loc = root_locus(m, n_samples)
    return bool(np.nanmin(loc.z.real) >= -A_STABLE_TOL)


def stability_angle(
    m: MethodCoefficients,
    resolution: float = 1e-4,
    n_samples: int = DEFAULT_SAMPLES,
) -> float:
    """A(phi)-stability angle in degrees.

    The locus is sampled densely; if it never enters the left half plane
    the method is A-stable and 90 is returned.  Otherwise the sample closest
    to the negative real axis in angle is refined by golden-section search
    on the neighbouring interval, well past ``resolution`` degrees.
    """
    polys = characteristic_polynomials(m)
    loc = root_locus(m, n_samples)
    if np.nanmin(loc.z.real) >= -A_STABLE_TOL:
        return 90.0
    ang = _angle_from_negative_axis(loc.z)
    if np.all(np.isnan(ang)):
        return 0.0
    j = int(np.nanargmin(ang))
    dtheta = 2.0 * np.pi / n_samples

    def f(theta):
        a = _angle_from_negative_axis(_z_of_theta(polys, theta))
        return float(a) if np.isfinite(a) else 180.0

    lo, hi = loc.theta[j] - dtheta, loc.theta[j] + dtheta
    best = ang[j]
    if f(lo) > best and f(hi) > best:
        res = minimize_scalar(f, bracket=(lo, loc.theta[j], hi), method="golden", tol=1e-10)
        best = min(best, float(res.fun))
    return float(min(max(best, 0.0), 90.0))


def zero_stable(m_or_rho, tol: float = 1e-9, sep: float = 1e-7):
    """Root condition for ``rho``.

    Accepts a :class:`MethodCoefficients` or a coefficient array of ``rho`` in
    descending powers.  Returns ``(ok, roots)``.
    """
    rho = m_or_rho.alpha if isinstance(m_or_rho, MethodCoefficients) else np.asarray(m_or_rho, float)
    roots = np.roots(rho)
    mod = np.abs(roots)
    if np.any(mod > 1.0 + tol):
        return False, roots
    on_circle = roots[mod >= 1.0 - tol]
    for a in range(on_circle.size):
        for b in range(a + 1, on_circle.size):
            if abs(on_circle[a] - on_circle[b]) <= sep:
                return False, roots
    return True, roots


def _companion(alpha, b, w, z, size):
    den = 1.0 - z * w
    if abs(den) <= 1e-14:
        raise StabilityPoleError(f"1 - z*{w:.6g} vanishes at z={z}")
    k = alpha.size - 1
    M = np.zeros((size, size), dtype=complex)
    M[0, :k] = (-alpha[1:] + z * b[1:]) / den
    if size > 1:
        M[1:, :-1] = np.eye(size - 1)
    return M


def stability_matrix(m: MethodCoefficients, z: complex) -> np.ndarray:
    """Companion matrix advancing ``(y_n, ..., y_{n-k+1})`` for ``y' = lambda y``, ``z = h lambda``."""
    b = m.beta_full + m.mu
    return _companion(m.alpha, b, m.implicit_weight, complex(z), m.k)


def spectral_radius(M: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def objectives(m: MethodCoefficients):
    """``(Phi1, Phi2)`` with ``Phi1 = 1/(1 + phi)`` (phi in degrees) and
    ``Phi2 = rho_a^2 + rho_b^2`` at ``ell = p + 1``."""
    phi = stability_angle(m)
    rho_a, rho_b = order_residuals(m, None, m.k + 1)
    return 1.0 / (1.0 + phi), rho_a**2 + rho_b**2


def lagrange_matrix(nodes, targets) -> np.ndarray:
    """``R`` with ``R @ v`` the values at ``targets`` of the polynomial through ``(nodes, v)``."""
    nodes = np.asarray(nodes, float)
    targets = np.asarray(targets, float)
    R = np.ones((targets.size, nodes.size))
    for j, xj in enumerate(nodes):
        for m, xm in enumerate(nodes):
            if m != j:
                R[:, j] *= (targets - xm) / (xj - xm)
    return R


def product_norm(trace, family: str, lam: float, resample: bool = False) -> np.ndarray:
    """Running spectral norm of the product of per-step stability matrices.

    Parameters
    ----------
    trace : iterable of records
        Each record exposes ``t`` (time reached), ``h``, ``k`` and
        ``accepted``; rejected rows are skipped.  The first record's
        ``t - h`` is taken as the initial time.
    family : str
        Method family whose variable-step coefficients are rebuilt per step.
    lam : float
        Scalar eigenvalue; each step uses ``z = h lam``.
    resample : bool
        If false (default) every step uses the coefficients implied by the
        recorded grid, inside the admissible band or not.  If true, steps
        whose fractions leave the band are replayed the way the integrator
        takes them (see Notes).

    Returns
    -------
    ndarray
        ``||M_n ... M_1||_2`` after each accepted step.

    Notes
    -----
    The state is the vector of the ``K`` most recent grid values, ``K`` the
    largest order in the trace; lower orders put zero weight on the oldest
    entries.  With ``resample=True`` a step whose fractions leave the band
    first interpolates the past values onto a uniform grid with the new
    spacing (a Lagrange matrix joins the product) and then uses the uniform
    coefficients.  Until ``K`` grid points
    exist the missing entries are taken on a uniform grid, as the
    integrator's start-up does.
    """
    family = canonical_family(family)
    steps = [r for r in trace if r.accepted]
    if not steps:
        return np.zeros(0)
    size = max(int(r.k) for r in steps)
    t0 = steps[0].t - steps[0].h
    grid = t0 - steps[0].h * np.arange(size)  # t_n, t_{n-1}, ... of the state
    P = np.eye(size, dtype=complex)
    norms = np.empty(len(steps))
    for n, r in enumerate(steps):
        k, h = int(r.k), float(r.h)
        c = fractions_from_times(grid[:k], h)
        if resample and not is_admissible(c, k):
            uniform = grid[0] - h * np.arange(size)
            P = lagrange_matrix(grid, uniform) @ P
            grid = uniform
            c = uniform_fractions(k)
        m = variable_coefficients(family, k, c, check=False)
        M = _companion(m.alpha, m.beta_full + m.mu, m.implicit_weight, h * lam, size)
        P = M @ P
        norms[n] = np.linalg.norm(P, 2)
        grid = np.concatenate(([grid[0] + h], grid[:-1]))
    return norms
