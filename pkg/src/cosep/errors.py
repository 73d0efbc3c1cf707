"""Exception types shared across the package."""


class CosepError(Exception):
    """Base class for all package errors."""


class DimensionError(CosepError, ValueError):
    """Array shapes or sizes do not agree."""


class InvalidParameterError(CosepError, ValueError):
    """A scalar parameter is outside its admissible range."""


class DegenerateColumnError(CosepError, ArithmeticError):
    """An effective sensing column has zero norm."""


class OptimizationError(CosepError, RuntimeError):
    """Mask design could not make any progress."""


class SolverError(CosepError, RuntimeError):
    """The L1 solver did not converge.

    The last iterate and its residual are kept so callers can still use
    the approximate answer.
    """

    def __init__(self, message, x=None, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.x = x
        self.residual = residual
        self.iterations = iterations


class ParseError(CosepError, ValueError):
    """A file could not be parsed. ``offset`` is the byte offset of the fault."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
        self.offset = offset


class ValidationError(CosepError, ValueError):
    """Parsed content violates a data invariant."""
