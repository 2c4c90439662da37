"""Shared exception types."""


class NumericalError(RuntimeError):
    """Raised when an optimization loop produces a non-finite objective."""
