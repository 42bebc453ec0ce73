"""Exception types shared across the package."""


class ValidationError(ValueError):
    """A parameter or input file is out of range or malformed.

    Messages name the offending field (or file line) so callers can report
    actionable errors.
    """


class SaturationError(RuntimeError):
    """The offered load meets or exceeds capacity (rho >= 1)."""
