"""Baseline encoders and the embedding interchange format.

Downsample is a linear band-limited resampler from 320,000 samples to D;
Random draws a deterministic standard-normal vector keyed by item id. Both
default to D = 768. The interchange file is a small custom binary so external
encoder adapters can produce it from any language.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.signal import firwin, resample_poly

from .errors import DegenerateInputError, FormatError, UsageError
from .synth import CLIP_SAMPLES, Waveform

DEFAULT_DIM = 768

MAGIC = b"AEB1"
FORMAT_VERSION = 1

_KAISER_BETA = 8.6
_ZERO_CROSSINGS = 64


@dataclass
class EmbeddingSet:
    encoder_name: str
    dim: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)

    def add(self, item_id: str, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=np.float32)
        if vec.shape != (self.dim,):
            raise FormatError(
                f"embedding for {item_id!r} has shape {vec.shape}, expected ({self.dim},)"
            )
        if item_id in self.vectors:
            raise FormatError(f"duplicate embedding id {item_id!r}")
        self.vectors[item_id] = vec


@lru_cache(maxsize=4)
def _resample_filter(up: int, down: int) -> np.ndarray:
    # windowed sinc at the upsampled rate: cutoff at the target Nyquist,
    # 64 zero-crossings per side, Kaiser beta 8.6
    max_rate = max(up, down)
    half = _ZERO_CROSSINGS * max_rate
    return firwin(2 * half + 1, 1.0 / max_rate, window=("kaiser", _KAISER_BETA))


def downsample_encode(waveform: Waveform, dim: int = DEFAULT_DIM) -> np.ndarray:
    """Polyphase band-limited resample of the clip to `dim` samples; linear."""
    x = np.asarray(waveform.samples, dtype=np.float64)
    if x.shape != (CLIP_SAMPLES,):
        raise UsageError(f"expected {CLIP_SAMPLES}-sample waveform, got {x.shape}")
    g = np.gcd(dim, CLIP_SAMPLES)
    up, down = dim // g, CLIP_SAMPLES // g
    y = resample_poly(x, up, down, window=_resample_filter(up, down))
    assert y.shape == (dim,)
    return y.astype(np.float32)


def random_encode(item_id: str, dim: int = DEFAULT_DIM, seed: int = 0) -> np.ndarray:
    """Standard-normal vector keyed by (seed, item id); order-independent."""
    digest = hashlib.blake2b(f"{seed}:{item_id}".encode(), digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    return rng.standard_normal(dim).astype(np.float32)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise DegenerateInputError("cosine undefined for zero-norm vector")
    return float(np.dot(u, v) / (nu * nv))


def write_embeddings(path, emb: EmbeddingSet) -> None:
    """Little-endian binary: magic, u32 version, u32 dim, u64 count, then
    (u16 id-length, id bytes, dim x f32) records sorted by id."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIQ", FORMAT_VERSION, emb.dim, len(emb.vectors)))
        for item_id in sorted(emb.vectors):
            id_bytes = item_id.encode("utf-8")
            if len(id_bytes) > 0xFFFF:
                raise FormatError(f"id too long: {item_id[:40]!r}...")
            fh.write(struct.pack("<H", len(id_bytes)))
            fh.write(id_bytes)
            vec = np.ascontiguousarray(emb.vectors[item_id], dtype="<f4")
            fh.write(vec.tobytes())


def read_embeddings(path, encoder_name: str | None = None) -> EmbeddingSet:
    with open(path, "rb") as fh:
        head = fh.read(4)
        if head != MAGIC:
            raise FormatError(f"{path}: bad magic {head!r}, expected {MAGIC!r}")
        raw = fh.read(16)
        if len(raw) != 16:
            raise FormatError(f"{path}: truncated header")
        version, dim, count = struct.unpack("<IIQ", raw)
        if version != FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        emb = EmbeddingSet(encoder_name=encoder_name or str(path), dim=dim)
        vec_bytes = 4 * dim
        for _ in range(count):
            raw = fh.read(2)
            if len(raw) != 2:
                raise FormatError(f"{path}: truncated at record boundary")
            (id_len,) = struct.unpack("<H", raw)
            id_bytes = fh.read(id_len)
            if len(id_bytes) != id_len:
                raise FormatError(f"{path}: truncated id")
            item_id = id_bytes.decode("utf-8")
            raw = fh.read(vec_bytes)
            if len(raw) != vec_bytes:
                raise FormatError(f"{path}: truncated vector for id {item_id!r}")
            emb.add(item_id, np.frombuffer(raw, dtype="<f4").copy())
        if fh.read(1):
            raise FormatError(f"{path}: trailing bytes after {count} records")
    return emb
