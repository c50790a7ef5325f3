"""Exception types shared across the package."""


class CoreselectError(Exception):
    """Base class for every error raised by this library."""


class ValidationError(CoreselectError, ValueError):
    """A value, field, or file content violates its documented contract."""


class ShapeError(CoreselectError, ValueError):
    """Array arguments have mismatched or inconsistent shapes."""


class ConfigurationError(CoreselectError, ValueError):
    """Inputs are individually valid but mutually inconsistent."""


class NumericError(CoreselectError, ArithmeticError):
    """A computation received or produced non-finite values."""


class ParseError(CoreselectError, ValueError):
    """A file could not be parsed. Carries the path and 1-based line number."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = "" if path is None else str(path)
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)
