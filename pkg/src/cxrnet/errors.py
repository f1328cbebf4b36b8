"""Exception hierarchy shared by all cxrnet modules.

Each class corresponds to one failure category surfaced by the CLI with a
distinct exit code (see cli.EXIT_CODES).
"""


class CxrnetError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(CxrnetError):
    """Tensor shape or extent violates an operation's contract."""


class InputError(CxrnetError):
    """Input values violate an operation's contract (e.g. non-binary labels)."""


class ConfigError(CxrnetError):
    """Run configuration is malformed or contains unknown keys."""


class LayoutError(CxrnetError):
    """Dataset directory tree does not match the expected layout."""


class DecodeError(CxrnetError):
    """An image file could not be decoded."""


class FormatError(CxrnetError):
    """A checkpoint file is corrupt, truncated, or has an unsupported version."""


class StateError(CxrnetError):
    """An operation was called in an invalid state (e.g. backward without cache)."""


class NumericError(CxrnetError):
    """A numeric failure occurred (NaN/Inf escaped a computation)."""
