"""Batch adaptation: rendered WAVs -> pooled embeddings -> interchange file."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from . import aeb
from .backends import run_backend
from .errors import AdapterError, ConfigError, EncoderRuntimeError, FormatError
from .spec import AdapterSpec


def _read_wav_mono(path) -> tuple[int, np.ndarray]:
    rate, data = wavfile.read(path)
    if data.ndim != 1:
        raise FormatError(f"{path}: expected mono audio, got shape {data.shape}")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise FormatError(f"{path}: unsupported sample dtype {data.dtype}")
    return rate, samples


def prepare_input(samples: np.ndarray, src_rate: int, spec: AdapterSpec) -> np.ndarray:
    """Resample to the encoder's rate, then zero-pad or crop to its window."""
    if src_rate != spec.sample_rate:
        g = int(np.gcd(spec.sample_rate, src_rate))
        samples = resample_poly(samples, spec.sample_rate // g, src_rate // g)
    want = int(round(spec.input_seconds * spec.sample_rate))
    if len(samples) < want:
        samples = np.concatenate([samples, np.zeros(want - len(samples))])
    return samples[:want]


def pool_tokens(output: np.ndarray, spec: AdapterSpec) -> np.ndarray:
    """Apply the spec's pooling rule to a backend output."""
    if output.ndim == 1:
        if spec.pooling == "truncate-then-average":
            raise ConfigError(
                f"{spec.name}: truncate-then-average needs a token sequence, got a vector"
            )
        return output
    if output.ndim != 2:
        raise FormatError(f"encoder output has {output.ndim} axes, expected 1 or 2")
    if spec.pooling == "truncate-then-average":
        keep = spec.retained_tokens()
        if keep is None:
            keep = int(round(len(output) * min(10.0 / spec.input_seconds, 1.0)))
        output = output[:keep]
    return output.mean(axis=0)


@dataclass
class AdaptResult:
    n_scenes: int
    out_path: Path
    dim: int


def adapt(wav_dir, spec: AdapterSpec, out_path) -> AdaptResult:
    """Embed every WAV in `wav_dir` and write one interchange file.

    Scene ids are the WAV file stems. Encoder failures are re-raised with the
    offending scene id in the message.
    """
    wav_dir = Path(wav_dir)
    paths = sorted(wav_dir.glob("*.wav"))
    if not paths:
        raise ConfigError(f"no .wav files under {wav_dir}")
    vectors: dict[str, np.ndarray] = {}
    for path in paths:
        scene_id = path.stem
        try:
            rate, samples = _read_wav_mono(path)
            pooled = pool_tokens(run_backend(spec, prepare_input(samples, rate, spec)), spec)
        except AdapterError:
            raise
        except Exception as exc:
            raise EncoderRuntimeError(f"{spec.name} failed on scene {scene_id!r}: {exc}") from exc
        if pooled.shape != (spec.dim,):
            raise FormatError(
                f"scene {scene_id!r}: encoder produced dim {pooled.shape}, spec says {spec.dim}"
            )
        vectors[scene_id] = pooled.astype(np.float32)
    aeb.write_embeddings(out_path, spec.dim, vectors)
    return AdaptResult(n_scenes=len(vectors), out_path=Path(out_path), dim=spec.dim)


@dataclass
class ValidationReport:
    ok: bool
    dim: int
    n_embeddings: int
    missing: list[str] = field(default_factory=list)
    extra: list[str] = field(default_factory=list)

    def lines(self) -> list[str]:
        out = [f"dim={self.dim} embeddings={self.n_embeddings}"]
        for label, ids in (("missing", self.missing), ("extra", self.extra)):
            if ids:
                shown = ", ".join(ids[:10]) + (" ..." if len(ids) > 10 else "")
                out.append(f"{label} ({len(ids)}): {shown}")
        out.append("ok" if self.ok else "mismatch")
        return out


def validate(embedding_path, scene_ids) -> ValidationReport:
    """Check an interchange file's structure and id coverage.

    Structural corruption raises FormatError (with a byte offset); coverage
    problems are reported, not raised.
    """
    dim, ids = aeb.read_index(embedding_path)
    have, want = set(ids), set(scene_ids)
    missing = sorted(want - have)
    extra = sorted(have - want)
    return ValidationReport(
        ok=not missing and not extra,
        dim=dim,
        n_embeddings=len(ids),
        missing=missing,
        extra=extra,
    )
