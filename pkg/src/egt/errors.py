"""Exception types shared across the package.

Every raised error derives from EgtError so callers (and the CLI exit-code
mapping) can distinguish our failures from genuine bugs.
"""


class EgtError(Exception):
    """Base class for all package errors."""


class ShapeError(EgtError):
    """Operand dimensions do not conform."""


class ValidationError(EgtError):
    """An input violates a documented precondition.

    When the violation is quantitative (e.g. a non-orthonormal matrix), the
    measured residual is attached as ``residual``.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DomainError(ValidationError):
    """A scalar argument lies outside the admissible domain."""


class ConvergenceError(EgtError):
    """An iteration hit its sweep limit; ``residual`` holds the last measure."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
