"""Exception types shared across the package."""


class LmpkitError(Exception):
    """Base class for all package errors."""


class ParseError(LmpkitError):
    """Raised on malformed expression text; carries the source position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class EvalError(LmpkitError):
    """Raised when evaluation hits an unbound variable or leaves the reals."""


class InputError(LmpkitError):
    """Invalid user-supplied data: bad parameters, schemas, certificates."""


class NumericalError(LmpkitError):
    """An internal numerical routine failed to reach its advertised accuracy."""
