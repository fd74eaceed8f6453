"""Exception types shared across the package."""


class SepTracerError(Exception):
    """Base class for all package errors."""


class InvalidArgument(SepTracerError, ValueError):
    """An argument is outside its documented domain."""


class EvaluationError(SepTracerError, ArithmeticError):
    """An integrand or kernel produced a non-finite value."""


class PoleProximityError(EvaluationError):
    """A quadrature node sits too close to a pole of the integrand."""


class ConsistencyError(SepTracerError):
    """A computed quantity failed an internal self-consistency check."""


class UnsupportedDimension(InvalidArgument):
    """Tensor quadrature was requested in too many dimensions."""


class DomainError(SepTracerError):
    """The requested quantity does not exist for the given parameters."""
