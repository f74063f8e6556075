"""Exception hierarchy shared by every module in the package."""


class SQError(Exception):
    """Base class for all errors raised by sqsolve."""


class RejectedInputError(SQError, ValueError):
    """Input contains non-finite entries or has an invalid shape."""


class EmptyDistributionError(SQError, ValueError):
    """Sampling was requested from a distribution with zero total weight."""


class DegenerateRowError(SQError, ValueError):
    """A row (or diagonal entry) needed by an update has zero norm."""


class PreconditionError(SQError, ValueError):
    """A solver precondition does not hold (e.g. matrix is not SPD)."""


class SamplingFailureError(SQError, RuntimeError):
    """Rejection sampling exhausted its attempt budget."""


class ParseError(SQError, ValueError):
    """Malformed Matrix Market or vector file."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class GenerationError(SQError, ValueError):
    """Requested instance cannot be generated; carries the achieved condition number."""

    def __init__(self, message, achieved_kappa=None):
        self.achieved_kappa = achieved_kappa
        super().__init__(message)
