"""Exception hierarchy shared across the package."""


class PolicymcError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(PolicymcError):
    """Lexical or syntactic error in a model, property, or rules file.

    Carries a 1-based line and column so front ends can point at the
    offending token.
    """

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class ModelError(PolicymcError):
    """Structural problem in a model (deadlock state, dangling id, ...)."""


class FormatError(PolicymcError):
    """Malformed input file: bad header, wrong dimensions, non-finite data."""


class CheckError(PolicymcError):
    """Query/model mismatch or unresolved label during model checking."""


class PolicyError(PolicymcError):
    """Policy cannot be applied: undefined state, disabled action, bad index."""


class InternalError(PolicymcError):
    """An internal invariant failed; indicates a bug, not a user error."""
