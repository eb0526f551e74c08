"""Shared exception types.

Kept deliberately small: callers distinguish bad arguments, exceeded
capacity/search limits, malformed files, and violated mathematical
invariants; everything else is a plain ValueError.
"""


class DimensionMismatch(ValueError):
    """Operands have incompatible sizes."""


class CapacityError(RuntimeError):
    """Input exceeds a documented enumeration / integer-width cap."""


class SearchExhausted(RuntimeError):
    """A guaranteed-to-exist object was not found within the scan cap."""


class GenerationError(RuntimeError):
    """Instance construction failed within the rejection limit."""


class ParseError(ValueError):
    """Malformed serialized data; message names the offending line."""


class VersionError(ValueError):
    """Serialized header does not match the expected format/version."""


class InvariantViolation(AssertionError):
    """A checked mathematical invariant failed; carries both sides."""

    def __init__(self, message: str, lhs=None, rhs=None):
        super().__init__(message)
        self.lhs = lhs
        self.rhs = rhs
