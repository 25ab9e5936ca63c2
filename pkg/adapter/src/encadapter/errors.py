"""Adapter error hierarchy."""


class AdapterError(Exception):
    """Base class for adapter failures."""


class ConfigError(AdapterError, ValueError):
    """Bad adapter spec file or field values."""


class FormatError(AdapterError):
    """Malformed embedding file (reports the byte offset of the problem)."""


class MissingWeightsError(AdapterError, FileNotFoundError):
    """Checkpoint path named by the spec does not exist."""


class EncoderRuntimeError(AdapterError):
    """Encoder failed on a scene; message carries the scene id."""
