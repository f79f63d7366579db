"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`SmileError`
so callers (and the CLI) can map failures to exit codes.
"""

from __future__ import annotations


class SmileError(Exception):
    """Base class for package errors."""


class DomainError(SmileError, ValueError):
    """Argument outside the domain of the operation."""


class PriceOutOfBounds(DomainError):
    """Call price outside the open no-arbitrage interval."""


class ConvergenceError(SmileError, RuntimeError):
    """Iterative solver hit its iteration cap."""


class MembershipError(SmileError):
    """Smile fails a membership test (monotonicity or surjectivity)."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class NoSolution(SmileError):
    """Negative discriminant in the sigma-from-l quadratic."""


class NonPositiveVol(SmileError):
    """Selected root of the sigma-from-l quadratic is not positive."""


class ValidationError(SmileError):
    """Parameter set fails validation."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class QuadratureError(SmileError):
    """Adaptive quadrature exhausted its panel budget."""


class SingularExpansion(SmileError):
    """ATM expansion denominator 2 - a0*a1 too close to zero."""


class DataError(SmileError):
    """Market pillars are inconsistent (e.g. d1 not decreasing)."""


class InputFormatError(SmileError):
    """Malformed input file."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConstraintViolation(SmileError):
    """Interpolated l breaks one of the calibration constraints."""

    def __init__(self, constraint: str, detail: str = ""):
        msg = constraint if not detail else f"{constraint}: {detail}"
        super().__init__(msg)
        self.constraint = constraint


class OptimizationFailure(SmileError):
    """No feasible point found within the multistart budget."""
