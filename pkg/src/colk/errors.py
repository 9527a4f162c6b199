"""Exception types raised by the package."""


class InputError(ValueError):
    """Malformed arguments: dimension mismatch, invalid ranges, bad data."""


class ConfigError(ValueError):
    """An experiment or learner configuration violates a constraint."""


class DataError(InputError):
    """A data file could not be read or parsed.

    ``location`` names the offending path/row/column when known.
    """

    def __init__(self, message, location=None):
        self.location = location
        if location is not None:
            message = f"{location}: {message}"
        super().__init__(message)


class DivergenceError(RuntimeError):
    """A learner produced non-finite weights."""


class MissingFileError(DataError):
    pass


class ParseError(DataError):
    pass


class ColumnRangeError(DataError):
    pass
