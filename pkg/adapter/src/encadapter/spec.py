"""Adapter specs: one YAML file per wrapped encoder."""

from __future__ import annotations

from dataclasses import dataclass

import yaml

from .errors import ConfigError

POOLING_RULES = ("global-average", "truncate-then-average")

# benchmark clips are 10 s; truncate-then-average keeps the token prefix
# covering this window before pooling
SCENE_SECONDS = 10.0

_FIELDS = {
    "name", "sample_rate", "input_seconds", "pooling", "dim",
    "backend", "checkpoint", "tokens_per_second",
}


@dataclass(frozen=True)
class AdapterSpec:
    name: str
    sample_rate: int
    input_seconds: float
    pooling: str
    dim: int
    backend: str = "checkpoint"  # "checkpoint" or one of the stub backends
    checkpoint: str | None = None
    tokens_per_second: float | None = None  # sequence-output encoders only

    def __post_init__(self):
        if not self.name or any(c in self.name for c in "/\\ "):
            raise ConfigError(f"bad encoder name {self.name!r}")
        if self.sample_rate <= 0:
            raise ConfigError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.input_seconds <= 0:
            raise ConfigError(f"input_seconds must be positive, got {self.input_seconds}")
        if self.pooling not in POOLING_RULES:
            raise ConfigError(f"unknown pooling rule {self.pooling!r}; one of {POOLING_RULES}")
        if self.dim <= 0:
            raise ConfigError(f"dim must be positive, got {self.dim}")
        if self.tokens_per_second is not None and self.tokens_per_second <= 0:
            raise ConfigError("tokens_per_second must be positive")

    @property
    def n_tokens(self) -> int | None:
        """Sequence length the encoder emits for a full-length input."""
        if self.tokens_per_second is None:
            return None
        return int(round(self.tokens_per_second * self.input_seconds))

    def retained_tokens(self) -> int | None:
        """Prefix length kept under truncate-then-average pooling."""
        n = self.n_tokens
        if n is None:
            return None
        return int(round(n * min(SCENE_SECONDS / self.input_seconds, 1.0)))


def load_spec(path) -> AdapterSpec:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a mapping")
    unknown = set(doc) - _FIELDS
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    try:
        return AdapterSpec(**doc)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
