"""Exception hierarchy shared by every module of the package."""


class DiscMCError(Exception):
    """Base class for all errors raised by discmc."""


class DimensionError(DiscMCError, ValueError):
    """Operands have incompatible shapes or lengths."""


class ParameterError(DiscMCError, ValueError):
    """A scalar or structural parameter is out of its admissible range."""


class ConvergenceError(DiscMCError, RuntimeError):
    """An iterative routine hit its iteration cap before converging.

    The best-effort result is kept on ``result`` so callers can still
    inspect or use it.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class DataError(DiscMCError, ValueError):
    """Input data violates a dataset invariant (duplicates, bad ratings)."""


class ParseError(DataError):
    """A line of a ratings file could not be parsed."""

    def __init__(self, message, lineno=None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


class SolverError(DiscMCError, RuntimeError):
    """A solver step failed; ``trace`` holds the records produced so far."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
