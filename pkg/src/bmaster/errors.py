"""Exception hierarchy shared across the package."""


class BMasterError(Exception):
    """Base class for all package errors."""


class InvalidInputError(BMasterError, ValueError):
    """Malformed, non-finite or inconsistent user input."""


class DomainError(BMasterError, ValueError):
    """A parameter lies outside the support of its distribution."""


class SingularSystemError(BMasterError, ArithmeticError):
    """A precision matrix could not be factorized."""


class EmptyResultError(BMasterError, ValueError):
    """A filter or selection step left nothing behind."""
