"""Exception types raised across the package."""


class GMultiError(Exception):
    """Base class for all package errors."""


class InvalidData(GMultiError, ValueError):
    """Input observations or distances are malformed (non-finite, ragged, asymmetric)."""


class ConfigError(GMultiError, ValueError):
    """A parameter is outside its documented range."""


class InvalidWindow(GMultiError, ValueError):
    """A window is too short to define an edge-count profile."""


class WindowTooShort(InvalidWindow):
    """The trimmed scan range of a window is empty."""


class EmptyCandidates(GMultiError, ValueError):
    """An operation needing at least one candidate change-point received none."""
