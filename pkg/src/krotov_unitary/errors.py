"""Exception types raised across the package."""


class ValidationError(ValueError):
    """An input violates a documented invariant or precondition."""


class ConfigurationError(ValueError):
    """Inconsistent run configuration (dimensions, grids, option names)."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class NumericError(ArithmeticError):
    """A non-finite or overflowing value appeared during a computation."""


class FitError(ValueError):
    """The scaling-law fit is undetermined by the supplied points."""


class MonotonicityError(RuntimeError):
    """The objective increased between iterations beyond the tolerance.

    ``records`` holds every diagnostic record up to and including the
    offending iteration, ``field`` the field that produced the last one.
    """

    def __init__(self, message, records, field):
        super().__init__(message)
        self.records = records
        self.field = field
