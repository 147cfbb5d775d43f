"""Exception hierarchy shared by every module.

``InputError`` maps to CLI exit code 1; everything else that escapes is an
internal error (exit code 2).
"""


class SOCError(Exception):
    """Base class for all library errors."""


class InputError(SOCError, ValueError):
    """Bad user-supplied data: malformed files, out-of-range values, empty sets."""


class ConfigError(InputError):
    """Inconsistent shapes or configuration values."""


class FormatError(InputError):
    """A file does not follow its declared format."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class BadMagicError(FormatError):
    pass


class UnsupportedVersionError(FormatError):
    pass


class ShapeError(FormatError):
    pass


class NonFiniteError(SOCError, ArithmeticError):
    """A NaN or Inf appeared in a loss or activation."""
