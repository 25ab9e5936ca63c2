"""Adapters that wrap external audio encoders and emit interchange embeddings."""

from .adapt import AdaptResult, ValidationReport, adapt, validate
from .spec import SCENE_SECONDS, AdapterSpec, load_spec

__all__ = [
    "AdaptResult",
    "AdapterSpec",
    "SCENE_SECONDS",
    "ValidationReport",
    "adapt",
    "load_spec",
    "validate",
]
