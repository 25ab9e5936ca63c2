"""Run configuration: YAML schema with strict unknown-key rejection.

Every seed is explicit; there are no wall-clock defaults, so a config file
fully determines a run. The config hash (canonical JSON, SHA-256) is recorded
in every stage manifest and in report provenance.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import yaml

from .composition import ModelConfig
from .errors import ConfigError
from .training import TrainConfig


@dataclass(frozen=True)
class Seeds:
    pool_coat: int = 101
    pool_tre: int = 102
    balance: int = 103
    model: int = 104
    random_encoder: int = 105


@dataclass(frozen=True)
class PoolSizes:
    coat_candidates: int = 50_000
    tre_candidates: int = 150_000


@dataclass(frozen=True)
class BalanceSizes:
    coat_subset: int = 2_000
    tre_subset: int = 10_000
    bins_per_feature: int = 4


@dataclass(frozen=True)
class RunConfig:
    seeds: Seeds = field(default_factory=Seeds)
    pools: PoolSizes = field(default_factory=PoolSizes)
    balance: BalanceSizes = field(default_factory=BalanceSizes)
    splits: tuple[float, float, float] = (0.8, 0.1, 0.1)
    patch_bank: str | None = None
    encoders: tuple[str, ...] = ("downsample", "random")
    embedding_dim: int = 768
    train: TrainConfig = field(default_factory=TrainConfig)
    out_root: str = "runs/out"

    def model_config(self) -> ModelConfig:
        return ModelConfig(dim=self.embedding_dim, seed=self.seeds.model)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["splits"] = list(self.splits)
        doc["encoders"] = list(self.encoders)
        return doc

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]


DESK_SCALE = {
    "pools": {"coat_candidates": 5_000, "tre_candidates": 2_000},
    "balance": {"coat_subset": 200, "tre_subset": 500},
}


def _build(cls, doc: dict, path: str):
    import dataclasses

    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(doc) - set(fields)
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} at {path or '<root>'}")
    kwargs = {}
    for name, value in doc.items():
        nested = {"seeds": Seeds, "pools": PoolSizes, "balance": BalanceSizes, "train": TrainConfig}
        if name in nested:
            if not isinstance(value, dict):
                raise ConfigError(f"{path}{name}: expected a mapping")
            kwargs[name] = _build(nested[name], value, f"{path}{name}.")
        elif name == "splits":
            if not (isinstance(value, list) and len(value) == 3):
                raise ConfigError(f"{path}splits: expected a list of 3 fractions")
            kwargs[name] = tuple(float(v) for v in value)
        elif name == "encoders":
            if not isinstance(value, list):
                raise ConfigError(f"{path}encoders: expected a list of names")
            kwargs[name] = tuple(str(v) for v in value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value under {path or '<root>'}: {exc}") from exc


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path=None, desk_scale: bool = False, overrides: dict | None = None) -> RunConfig:
    doc: dict = {}
    if path is not None:
        try:
            with open(path) as fh:
                loaded = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        doc = loaded
    if desk_scale:
        doc = _merge(doc, DESK_SCALE)
    if overrides:
        doc = _merge(doc, overrides)
    return _build(RunConfig, doc, "")
