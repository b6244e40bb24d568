"""Exception hierarchy shared by all modules."""


class QuantKitError(Exception):
    """Base class for library errors."""


class ParameterError(QuantKitError, ValueError):
    """An argument violates a documented precondition."""


class InsufficientHistoryError(QuantKitError, ValueError):
    """Not enough observations for the requested window."""


class DegenerateError(QuantKitError, ValueError):
    """A quantity is undefined for the given input (zero variance, zero range, ...)."""


class NoSignalError(QuantKitError, ValueError):
    """The input carries no tradable signal (e.g. all scores equal)."""


class DataError(QuantKitError):
    """Problem with on-disk panel data."""


class ParseError(DataError):
    """A cell could not be parsed as a number."""

    def __init__(self, path, line, column, token):
        self.path = path
        self.line = line
        self.column = column
        self.token = token
        super().__init__(f"{path}: line {line}, column {column}: cannot parse {token!r}")


class AlignmentError(DataError):
    """Ticker or date labels disagree between files."""


class ConvergenceError(QuantKitError, RuntimeError):
    """An iterative routine failed to converge; carries the best iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
