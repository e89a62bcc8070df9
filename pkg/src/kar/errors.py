"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4.
"""


class KarError(Exception):
    pass


class ConfigError(KarError):
    pass


class DataError(KarError):
    pass


class ParseError(DataError):
    def __init__(self, message, line_no=None, raw=None):
        self.line_no = line_no
        self.raw = raw
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class SplitError(DataError):
    pass


class NumericError(KarError):
    pass


class ShapeError(KarError, ValueError):
    pass


class CacheError(KarError):
    pass
