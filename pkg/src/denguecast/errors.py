"""Exception types shared across the package."""


class DataError(ValueError):
    """Input data violates the documented format or an invariant."""


class FitError(RuntimeError):
    """A numerical procedure cannot produce a valid result from the given data."""
