"""Exception types shared across the package."""


class BetascanError(Exception):
    """Base class for package errors."""


class InputError(BetascanError, ValueError):
    """Invalid caller-supplied data (dimension mismatch, bad parameters, malformed files)."""


class NumericalError(BetascanError, RuntimeError):
    """A computation could not be completed reliably."""


class PreconditionError(BetascanError, RuntimeError):
    """A stated precondition failed; the result is unverifiable rather than wrong."""
