"""Exception hierarchy shared across the package."""


class SignnError(Exception):
    """Base class for every error raised by signn."""


class DimensionError(SignnError, ValueError):
    pass


class ConfigError(SignnError, ValueError):
    pass


class DataError(SignnError, ValueError):
    """Input files are missing, malformed or inconsistent."""


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class RangeError(SignnError, IndexError):
    pass


class NumericError(SignnError, FloatingPointError):
    """A loss or gradient became non-finite."""


class AlignmentError(SignnError, ValueError):
    pass


class StateError(SignnError, RuntimeError):
    pass
