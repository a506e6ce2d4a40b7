"""Exception classes shared across the package.

Each class maps to one CLI exit code (see cli.EXIT_CODES): configuration
problems, data/IO problems, and numeric/training problems are kept apart so
callers can react differently.
"""


class DriftAEError(Exception):
    """Base class for all package errors."""


class ConfigError(DriftAEError):
    """Invalid configuration: bad schema, bad value, unknown key."""


class DimensionError(DriftAEError):
    """Array shapes do not match what an operation requires."""


class NumericError(DriftAEError):
    """A computation produced a non-finite value."""


class TrainingError(DriftAEError):
    """Training diverged or hit a non-finite loss; message names step and term."""


class IngestionError(DriftAEError):
    """Raw dataset files are missing, ragged, or inconsistent."""


class PersistenceError(DriftAEError):
    """A model or report file could not be read or written."""
