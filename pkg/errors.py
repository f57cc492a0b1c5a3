#!/usr/bin/env python3
"""
Exception hierarchy for hbl.

Library code raises these; results that are "data, not exceptions"
(forest violations, infeasible programs, failing inequality rows) are
returned inside report objects instead.
"""


# =============================================================================
# EXCEPTIONS
# =============================================================================

class HblError(Exception):
    """Base class for all hbl errors."""
    pass


class InvalidParameterError(HblError, ValueError):
    """Raised when an operation receives a parameter outside its domain."""
    pass


class DegenerateSpaceError(HblError):
    """Raised when a space is too small for the requested quantity."""
    pass


class SpaceDataError(HblError):
    """Raised when space data violates the metric or weight axioms."""

    def __init__(self, message: str, points: tuple = ()):
        super().__init__(message)
        self.points = tuple(points)


class SpaceParseError(HblError):
    """Raised when a JSON document does not match its schema."""

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer}: {message}" if pointer else message)
        self.pointer = pointer


class AmpFailureError(HblError):
    """Raised when a required approximate-midpoint witness does not exist."""

    def __init__(self, message: str, pair: tuple = ()):
        super().__init__(message)
        self.pair = tuple(pair)


class NonContractionError(HblError):
    """Raised when atom splitting exceeds its iteration cap."""
    pass


class ConfigError(HblError):
    """Raised when an experiment configuration is invalid."""
    pass
