"""Exception hierarchy shared across the package."""


class LimmError(Exception):
    """Base class for all errors raised by this package."""


class InvalidDimensionError(LimmError, ValueError):
    """A problem was requested with an unsupported size."""


class NotAvailableError(LimmError, KeyError):
    """No coefficients exist for the requested (family, k)."""


class DegenerateGridError(LimmError, ValueError):
    """Abscissae coincide or are out of order."""


class InadmissibleFractionsError(DegenerateGridError):
    """Stepsize fractions leave the band where variable coefficients are safe."""


class SingularMatrixError(LimmError, ArithmeticError):
    """LU factorization hit an exactly zero pivot."""

    def __init__(self, column):
        super().__init__(f"matrix is singular: zero pivot in column {column}")
        self.column = column


class ConvergenceError(LimmError, ArithmeticError):
    """An iterative solver stopped before reaching its tolerance.

    ``best`` holds the last iterate so callers can inspect it.
    """

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


class StepFailure(LimmError):
    """A single step could not be completed; the controller should shrink h."""


class StepSizeTooSmallError(LimmError):
    """The controller asked for a step below ``h_min``."""

    def __init__(self, t, h):
        super().__init__(f"step size {h:.3e} below minimum at t={t:.6g}")
        self.t = t
        self.h = h


class StabilityPoleError(LimmError, ZeroDivisionError):
    """``1 - z (mu_{-1} + beta_{-1})`` vanishes, so the stability matrix is undefined."""
