"""Exception types shared across the package."""


class DomainError(ValueError):
    """A mean or data value lies outside the domain of a rate function."""


class PartitionError(ValueError):
    """A label assignment is trivial (some row or column class is empty)."""
