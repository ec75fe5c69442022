"""Exception types shared across the toolkit."""


class CanopyError(Exception):
    """Base class for all canopy errors."""


class FrameError(CanopyError):
    """A geometric value was used in the wrong coordinate frame."""


class EmptyInputError(CanopyError):
    """An operation that needs at least one point received none."""


class InsufficientPointsError(CanopyError):
    """Too few points to fit the requested model."""


class DegenerateInputError(CanopyError):
    """Input admits no valid model fit (e.g. all samples collinear)."""


class NumericalError(CanopyError):
    """A matrix was singular or too ill-conditioned to use."""


class ParseError(CanopyError):
    """A file could not be parsed (malformed header or body)."""


class DataError(CanopyError):
    """A file parsed but its contents violate the format contract."""


class ConfigError(CanopyError):
    """Unknown configuration key or out-of-range value."""


class PackingError(CanopyError):
    """Scene generation could not place trees at the requested spacing."""


class PathError(CanopyError):
    """No collision-free camera path exists through the scene."""
