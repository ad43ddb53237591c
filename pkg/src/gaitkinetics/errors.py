"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes, so new error types should
subclass one of the three user-facing categories below rather than adding
a fourth.
"""

__all__ = [
    "GaitKineticsError",
    "InputError",
    "NoGaitDataError",
    "InternalInvariantError",
]


class GaitKineticsError(Exception):
    """Base class for all errors raised by this package."""


class InputError(GaitKineticsError):
    """Malformed file, inconsistent configuration, or invalid argument."""


class NoGaitDataError(GaitKineticsError):
    """The trial contains no usable gait data (too short, no events, ...)."""


class InternalInvariantError(GaitKineticsError):
    """An internal consistency check failed; indicates a bug, not bad input."""
