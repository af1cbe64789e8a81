"""Exception hierarchy shared across the engine.

The CLI maps these onto exit codes: usage problems exit 1, bad input data
exits 2, runtime failures (including missed real-time deadlines) exit 3.
"""


class HasQoeError(Exception):
    """Base class for all engine errors."""


class UsageError(HasQoeError):
    """Bad command-line invocation."""


class DataError(HasQoeError):
    """Input data is malformed or violates a declared invariant."""


class ManifestError(DataError):
    """Session manifest failed to parse or validate."""


class FrameFormatError(DataError):
    """Frame file is missing, malformed, or truncated."""


class ContainerError(DataError):
    """Portable tensor container failed to parse or validate."""


class ModelFormatError(DataError):
    """Regression model file failed to parse or validate."""


class DatasetError(DataError):
    """Dataset index is malformed or unusable."""


class DeadlineExceeded(HasQoeError):
    """A segment's compute time exceeded its playback duration in realtime mode."""
