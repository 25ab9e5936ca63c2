"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2,
MissingArtifactError -> 3, DataIntegrityError -> 4.
"""


class CompbenchError(Exception):
    """Base class for all package errors."""


class RangeError(CompbenchError, ValueError):
    """A value lies outside its declared range."""


class UsageError(CompbenchError, ValueError):
    """An operation was called in a way its contract forbids."""


class ConfigError(CompbenchError):
    """Invalid or unparseable run configuration."""


class MissingArtifactError(CompbenchError):
    """An upstream pipeline artifact is absent."""


class DataIntegrityError(CompbenchError):
    """Stored data violates a structural invariant or cross-reference."""


class FormatError(CompbenchError):
    """A binary or container file is malformed."""


class DegenerateInputError(CompbenchError, ValueError):
    """Numerically degenerate input (zero norm, constant design, ...)."""


class TrainingDivergedError(CompbenchError):
    """Non-finite loss or gradient during composition-model training."""
