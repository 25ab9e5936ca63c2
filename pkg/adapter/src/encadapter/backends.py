"""Encoder backends: stubs for CI plus a generic linear checkpoint runner.

A backend maps a prepared waveform (already resampled and padded to the
spec's input length) to either a single vector of shape (dim,) or a token
sequence of shape (n_tokens, dim). Pooling happens outside the backend.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import ConfigError, MissingWeightsError
from .spec import AdapterSpec


def _stub_constant(spec: AdapterSpec, samples: np.ndarray) -> np.ndarray:
    # same vector for every scene: downstream A-COAT marks all quads degenerate
    return np.linspace(0.1, 1.0, spec.dim)


def _stub_tokens_onehot(spec: AdapterSpec, samples: np.ndarray) -> np.ndarray:
    if spec.n_tokens is None:
        raise ConfigError(f"{spec.name}: stub-tokens-onehot needs tokens_per_second")
    tokens = np.zeros((spec.n_tokens, spec.dim))
    tokens[np.arange(spec.n_tokens), np.arange(spec.n_tokens) % spec.dim] = 1.0
    return tokens


def _load_projection(spec: AdapterSpec) -> np.ndarray:
    if spec.checkpoint is None or not os.path.exists(spec.checkpoint):
        raise MissingWeightsError(f"{spec.name}: checkpoint not found: {spec.checkpoint}")
    with np.load(spec.checkpoint) as ckpt:
        if "projection" not in ckpt:
            raise ConfigError(f"{spec.checkpoint}: no 'projection' array")
        proj = np.asarray(ckpt["projection"], dtype=np.float64)
    if proj.ndim != 2 or proj.shape[0] != spec.dim:
        raise ConfigError(
            f"{spec.checkpoint}: projection shape {proj.shape} incompatible with dim {spec.dim}"
        )
    return proj


def _checkpoint(spec: AdapterSpec, samples: np.ndarray) -> np.ndarray:
    """Linear frame encoder: chop into frames, project each to a token."""
    proj = _load_projection(spec)
    frame_len = proj.shape[1]
    n_frames = len(samples) // frame_len
    if n_frames == 0:
        raise ConfigError(f"{spec.name}: input shorter than one {frame_len}-sample frame")
    frames = samples[: n_frames * frame_len].reshape(n_frames, frame_len)
    return frames @ proj.T


BACKENDS = {
    "stub-constant": _stub_constant,
    "stub-tokens-onehot": _stub_tokens_onehot,
    "checkpoint": _checkpoint,
}


def run_backend(spec: AdapterSpec, samples: np.ndarray) -> np.ndarray:
    try:
        backend = BACKENDS[spec.backend]
    except KeyError:
        raise ConfigError(f"unknown backend {spec.backend!r}; one of {sorted(BACKENDS)}")
    return np.asarray(backend(spec, samples), dtype=np.float64)
