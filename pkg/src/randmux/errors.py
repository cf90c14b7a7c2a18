class RandmuxError(Exception):
    """Base class for package errors."""


class ParameterError(RandmuxError, ValueError):
    """An argument is outside its documented range."""


class ResourceError(RandmuxError):
    """A dense simulation or enumeration would exceed its configured cap."""


class InvariantError(RandmuxError, AssertionError):
    """A computed quantity violated a bound it is required to satisfy."""
