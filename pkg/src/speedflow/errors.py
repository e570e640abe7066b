"""Exception types shared across the package.

Each class carries the exit code the CLI uses when the error escapes to
the top level.
"""


class SpeedflowError(Exception):
    exit_code = 1


class StimulusError(SpeedflowError):
    """Synthetic stimulus cannot be rendered (object leaves the frame, bad spec)."""

    exit_code = 3


class PyramidError(SpeedflowError):
    """Pyramid construction impossible (a level would be too small)."""

    exit_code = 3


class FileFormatError(SpeedflowError):
    """Malformed or truncated data file (PGM, flow CSV, model file)."""

    exit_code = 4


class FitError(SpeedflowError):
    """Model fitting failed (degenerate samples)."""

    exit_code = 5
