"""Exception types raised across the package."""


class InvalidArgument(ValueError):
    pass


class PreconditionViolation(ValueError):
    pass


class UnsupportedDiagnostic(LookupError):
    """The problem cannot provide the exact quantity a diagnostic needs."""


class OracleFailure(RuntimeError):
    """The black-box oracle returned a non-finite value.

    ``trace`` carries whatever partial run record existed when the failure
    was detected, so callers can still flush it.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class ParseError(ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InternalError(RuntimeError):
    pass
