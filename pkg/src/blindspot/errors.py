"""Exception hierarchy.

Everything raised on bad *data* derives from :class:`DataError` so the CLI can
map it to exit code 2 without catching programming errors.
"""


class BlindspotError(Exception):
    """Base class for all package errors."""


class DataError(BlindspotError, ValueError):
    """Input data is malformed or inconsistent."""


class PGMError(DataError):
    """A PGM/PPM byte stream could not be parsed."""


class MagicError(PGMError):
    pass


class HeaderError(PGMError):
    pass


class DimensionError(PGMError):
    pass


class TruncatedError(PGMError):
    pass


class RangeError(PGMError):
    """A raw sample exceeds the header maxval."""


class SequenceError(DataError):
    """A frame directory is not a valid numbered sequence."""


class ShapeMismatchError(DataError):
    """Two grids that must agree in size do not."""


class DegenerateInputError(DataError):
    """Numerical procedure cannot produce a meaningful answer for this input."""


class TooFewVectorsError(DegenerateInputError):
    pass


class ParallelFieldError(DegenerateInputError):
    pass


class ConfigError(DataError):
    """A config or scene file is invalid."""
