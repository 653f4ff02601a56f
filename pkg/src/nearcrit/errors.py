"""Exception hierarchy shared by every module."""


class NearCritError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class InvalidParameter(NearCritError, ValueError):
    """A parameter is outside its admissible range."""


class InvalidRegime(InvalidParameter):
    """Unknown regime label."""


class InvalidInput(NearCritError, ValueError):
    """Malformed data handed to a routine (shapes, lattice values, files)."""


class OutOfRange(NearCritError, ValueError):
    """A query point lies outside the domain of a realised object."""


class NumericFailure(NearCritError, ArithmeticError):
    """A numerical routine did not converge or produced non-finite values."""


class CapacityError(NearCritError):
    """A sampled path left the pre-allocated intensity ceiling."""


class DependencyError(NearCritError):
    """An optional component is required but unavailable."""
