"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Raised when an input violates a documented precondition."""


class UndefinedMetricError(ValueError):
    """Raised when a metric is mathematically undefined for its input.

    Examples are an AUC over a single class or a correlation with a
    zero-variance argument. Aggregating callers catch it, skip the offending
    column or row and report how many were skipped.
    """
