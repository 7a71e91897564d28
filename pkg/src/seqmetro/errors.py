"""Exception hierarchy shared by every module."""


class SeqMetroError(Exception):
    """Base class for all package errors."""


class UsageError(SeqMetroError, ValueError):
    """An operation was called with an incompatible protocol or arguments."""


class DomainError(SeqMetroError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class ResourceError(SeqMetroError):
    """A size guard (rounds, matrix dimension, truncation) was exceeded."""

    def __init__(self, message, parameter=None):
        super().__init__(message)
        self.parameter = parameter


class NumericalError(SeqMetroError, ArithmeticError):
    """A numerical routine produced an unusable result."""
