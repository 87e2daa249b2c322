"""Exception hierarchy shared by all modules."""


class GFragError(Exception):
    """Base class for library errors."""


class DomainError(GFragError, ValueError):
    """Argument outside the domain where a quantity is finite or defined."""


class QuadratureError(GFragError):
    """Adaptive quadrature did not reach the requested tolerance."""


class NoConvergence(GFragError):
    """Iterative solver exhausted its iteration budget."""


class RegimeError(GFragError):
    """Quantity requested outside the parameter regime where it exists."""


class InversionError(GFragError):
    """Numerical Laplace inversion failed its cross-check."""


class ConfigError(GFragError, ValueError):
    """Invalid configuration or estimator request."""


class CflError(GFragError, ValueError):
    """Time step violates the stability bound of the explicit scheme."""


class NotConverged(GFragError):
    """Time integration has not reached a stationary regime."""
