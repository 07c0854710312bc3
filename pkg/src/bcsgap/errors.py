"""Exception hierarchy shared by every module of the package."""


class BCSGapError(Exception):
    """Base class for all package errors."""


class DomainError(BCSGapError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class ParameterError(BCSGapError, ValueError):
    """Physical parameters are inconsistent or outside their validity range."""


class ConfigError(BCSGapError, ValueError):
    """A run configuration file is missing keys or holds invalid values."""


class IntegrationError(BCSGapError, ArithmeticError):
    """The integrand returned a non-finite value."""

    def __init__(self, message, abscissa=None):
        super().__init__(message)
        self.abscissa = abscissa


class ConvergenceError(BCSGapError, RuntimeError):
    """An iterative solver exhausted its iteration budget."""

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class InvariantViolation(BCSGapError, RuntimeError):
    """A mathematical invariant of the model failed numerically."""


class StencilError(BCSGapError, ValueError):
    """A finite-difference stencil cannot be formed from the available samples."""
