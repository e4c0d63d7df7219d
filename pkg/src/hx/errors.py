"""Exception types raised across the package."""


class HxError(Exception):
    """Base class for all package errors."""


class SpecMismatchError(HxError, ValueError):
    """Two grid objects do not live on the same grid."""


class SymbolError(HxError, ArithmeticError):
    """A Fourier multiplier produced NaN or Inf on the lattice."""


class ExponentRangeError(HxError, ValueError):
    """An order/exponent parameter is outside its admissible range."""


class QuadratureError(HxError, ArithmeticError):
    """A numerical quadrature failed to converge."""


class TailToleranceError(HxError, ArithmeticError):
    """A half-space integrand has not decayed at the top of the t-grid."""


class AdmissibilityError(HxError, ValueError):
    """A (selector, order) combination outside the characterization's range."""


class SizeGuardError(HxError, ValueError):
    """A brute-force functional was asked to run on too large a grid."""


class ConfigError(HxError, ValueError):
    """A trial configuration violates its suite's constraints."""
