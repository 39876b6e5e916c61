"""Exception types shared across the package."""


class PriloError(Exception):
    """Base class for all package errors."""


class ShapeError(PriloError, ValueError):
    """Array lengths or dimensions do not agree."""


class RangeError(PriloError, IndexError):
    """A layer index or index range is invalid."""


class TraceError(PriloError):
    """An activation trace does not match the requested sub-network."""


class FormatError(PriloError):
    """A binary or text file is malformed.

    ``offset`` is the byte offset at which the problem was detected, when known.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ValidationError(PriloError):
    """Loaded data is well formed but internally inconsistent."""


class DataError(PriloError):
    """A dataset is empty or contains mismatched images."""


class DivergenceError(PriloError, FloatingPointError):
    """An optimisation produced a non-finite loss."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class ConfigError(PriloError):
    """An experiment or solver configuration is invalid."""


class RestartError(PriloError):
    """Every restart of a solver failed."""

    def __init__(self, message, errors=()):
        super().__init__(message)
        self.errors = list(errors)
