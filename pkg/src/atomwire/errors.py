"""Exception hierarchy shared by all atomwire modules."""


class AtomWireError(Exception):
    """Base class for every error raised by atomwire."""


class DomainError(AtomWireError, ValueError):
    """Argument outside the physical domain (e.g. a point below the mirror)."""


class SingularityError(AtomWireError, ArithmeticError):
    """Field evaluated on top of a charge element."""


class NoTrapError(AtomWireError):
    """The potential has no interior minimum in the search region."""


class NotAMinimumError(AtomWireError):
    """Negative curvature found at a point claimed to be a minimum."""


class ImmediateLossError(AtomWireError):
    """No tunneling barrier separates the minimum from the surface."""


class UnsupportedMirrorError(AtomWireError):
    """Operation requested for a mirror kind that does not support it."""


class GridLeakError(AtomWireError):
    """A bound eigenfunction does not decay before the grid boundary."""

    def __init__(self, message, suggested_grid=None):
        super().__init__(message)
        self.suggested_grid = suggested_grid


class ConfigError(AtomWireError):
    """Malformed experiment configuration, with optional source position."""

    def __init__(self, message, line=None, column=None):
        self.message = message
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message)
