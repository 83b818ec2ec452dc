"""Exception types.

``MalformedDocumentError`` is a parse-level failure (CLI exit code 2); the
others are domain-rule violations (CLI exit code 1).
"""
from __future__ import annotations


class QempcError(Exception):
    """Base class for every error raised by this package."""


class MalformedDocumentError(QempcError, ValueError):
    """Document is not valid JSON or lacks required fields."""


class PartitionError(QempcError, ValueError):
    """Partition data violate a structural rule."""


class DimensionMismatchError(PartitionError):
    pass


class EmptyRegionError(PartitionError):
    pass


class ContinuityError(PartitionError):
    """Control law jumps across a shared facet.

    Carries the worst offending pair and its residual.
    """

    def __init__(self, message, pair=None, residual=None):
        super().__init__(message)
        self.pair = pair
        self.residual = residual


class QuantizationOverflowError(QempcError, OverflowError):
    """A value lies outside the representable range of a fixed-point format.

    ``location`` describes where the value came from (region/entry or state
    index) when known.
    """

    def __init__(self, message, value=None, fmt=None, location=None):
        super().__init__(message)
        self.value = value
        self.fmt = fmt
        self.location = location


class StateOutsidePartitionError(QempcError, ValueError):
    """No region of the exact partition contains the state."""
