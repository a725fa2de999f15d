"""Exception types shared across the package.

Every error carries the process exit code the command-line front end uses
when it surfaces: 2 for validation problems, 3 for numeric failures and
4 for I/O.
"""

from __future__ import annotations


class SpinMarketError(Exception):
    """Base class for all package errors."""

    exit_code = 2


class InvalidParameterError(SpinMarketError, ValueError):
    """A parameter violates an operation's precondition."""


class ResourceLimitError(SpinMarketError, ValueError):
    """A request exceeds what exact enumeration can handle."""


class DegenerateStateError(SpinMarketError, ValueError):
    """The state leaves a derived quantity undefined (e.g. m = 0 under a constant-m rule)."""


class BracketError(SpinMarketError, ValueError):
    """A root bracket does not enclose a sign change."""


class InsufficientDataError(SpinMarketError, ValueError):
    """Too few samples for the requested estimate."""


class MissingDataError(SpinMarketError, ValueError):
    """A required column (typically volume) is absent."""


class ParseError(SpinMarketError, ValueError):
    """Malformed input file; ``row`` is the 1-based line number in the file."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class NumericFailure(SpinMarketError, ArithmeticError):
    """An iteration failed to converge; ``best_residual`` is the best value reached."""

    exit_code = 3

    def __init__(self, message: str, best_residual: float = float("nan")):
        self.best_residual = best_residual
        super().__init__(f"{message} (best residual {best_residual:.3e})")


class PoleError(SpinMarketError, ZeroDivisionError):
    """Evaluation at a pole of a rational map."""

    exit_code = 3


class StageError(SpinMarketError):
    """A pipeline stage failed; wraps the original error and keeps its exit code."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        if isinstance(cause, SpinMarketError):
            self.exit_code = cause.exit_code
        elif isinstance(cause, OSError):
            self.exit_code = 4
        elif isinstance(cause, ArithmeticError):
            self.exit_code = 3
        else:
            self.exit_code = 2
        super().__init__(f"stage '{stage}' failed: {cause}")
