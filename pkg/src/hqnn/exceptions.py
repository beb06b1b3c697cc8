"""Exception hierarchy shared across the package.

Every error raised by hqnn derives from HqnnError so callers can catch the
whole family at once. The CLI maps subfamilies onto exit codes: config
problems exit 1, data problems exit 2, numeric failures exit 3.
"""


class HqnnError(Exception):
    """Base class for all errors raised by this package."""


class InsufficientDataError(HqnnError):
    """Input series or dataset is too short for the requested operation."""


class ParameterError(HqnnError):
    """Invalid parameter value or combination (e.g. fast >= slow for MACD)."""


class CapacityError(HqnnError):
    """Requested register size is outside the supported range."""


class DomainError(HqnnError):
    """Value outside the mathematical domain of an operation."""


class ArityError(HqnnError):
    """Bound value count does not match a circuit's parameter slot count."""


class ShapeError(HqnnError):
    """Array shapes are inconsistent with the operation's contract."""


class NumericError(HqnnError):
    """Non-finite value encountered where a finite number is required."""


class TapeError(HqnnError):
    """Backward pass invoked with a tape from a mismatched forward pass."""


class FormatError(HqnnError):
    """Malformed input file structure (missing columns, bad header)."""


class DataError(HqnnError):
    """Well-formed file with semantically invalid content (bad row values)."""


class ConfigError(HqnnError):
    """Invalid experiment configuration."""
