"""Exception hierarchy shared by the numerical layers."""

from __future__ import annotations


class AkmsError(Exception):
    """Base class for every error raised by this package."""


class DomainError(AkmsError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class PreconditionError(AkmsError, ValueError):
    """A structural requirement of a formula is not met (e.g. non-integer mu)."""


class ConvergenceError(AkmsError, ArithmeticError):
    """A series or iteration did not meet its tolerance within the term budget.

    ``partial`` carries the best value reached, ``terms`` how many terms were used.
    """

    def __init__(self, message: str, partial=None, terms: int | None = None):
        super().__init__(message)
        self.partial = partial
        self.terms = terms


class NumericError(AkmsError, ArithmeticError):
    """Quadrature or root-finding failure; ``partial`` holds the last estimate."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial
