"""Exception hierarchy shared across the package.

Every error raised on purpose derives from :class:`EvPlaceError` so callers
(and the command line driver) can catch one base class.  Parse errors carry
the 1-based line number of the offending input row.
"""

from __future__ import annotations


class EvPlaceError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(EvPlaceError):
    """Malformed text input.  ``line`` is 1-based, 0 when unknown."""

    def __init__(self, message: str, line: int = 0):
        if line:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class BoundsError(EvPlaceError):
    """A coordinate falls outside the sensor geometry."""


class OrderingError(EvPlaceError):
    """Timestamps violate the required ordering."""


class ConfigError(EvPlaceError):
    """Invalid parameter or configuration value."""


class AlignmentError(EvPlaceError):
    """No window can be aligned to the requested sample time."""


class DegenerateDescriptorError(EvPlaceError):
    """A descriptor has zero norm where a metric needs a direction."""


class MissingGroundTruthError(EvPlaceError):
    """Evaluation asked for a query time the ground truth does not cover."""
