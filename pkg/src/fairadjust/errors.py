"""Exception types shared across the package."""


class FairadjustError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(FairadjustError, ValueError):
    """A schema, dataset, or row violates a structural invariant."""


class UnknownLevelError(SchemaError):
    """A categorical value is not one of the column's declared levels."""


class ParseError(FairadjustError, ValueError):
    """A delimited input file could not be parsed under its schema config."""


class FitError(FairadjustError, RuntimeError):
    """Model fitting failed."""


class PerfectSeparationError(FitError):
    """The logistic MLE does not exist (coefficient norm blew up)."""


class RankDeficientError(FitError):
    """The design matrix does not have full column rank."""
