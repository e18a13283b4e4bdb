"""Typed exceptions shared across the solver stack.

Exit-code mapping for the CLI lives in ``cli.py``; solver code raises these
and never calls ``sys.exit`` itself.
"""


class ChnsError(Exception):
    """Base class for all package errors."""


class ValidationError(ChnsError):
    """Configuration or input-data validation failed.

    ``violations`` carries every problem found in one pass, not just the
    first one.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ParseError(ChnsError):
    """A structured text file could not be parsed (carries a line number)."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FormatError(ChnsError):
    """A snapshot/control file violates the on-disk format contract."""


class CompatibilityViolation(ValidationError):
    """The t=0 control slice does not match the initial velocity trace."""


class ShapeMismatch(ChnsError):
    """Fields passed to an operation do not share a grid/shape."""


class TimeNodeMismatch(ChnsError):
    """Two time-indexed objects do not share the same time nodes."""


class TrajectoryIncomplete(ChnsError):
    """A trajectory does not cover the requested horizon."""


class LinearSolveFailure(ChnsError):
    """An inner linear solve did not reach the requested tolerance."""

    def __init__(self, message, residual=None, tolerance=None):
        self.residual = residual
        self.tolerance = tolerance
        super().__init__(message)


class StabilityBreach(ChnsError):
    """A field norm crossed the blowup guard (converts overflow to an error)."""


class MissingInput(ChnsError):
    """A run directory lacks the files a post-processing step needs."""
