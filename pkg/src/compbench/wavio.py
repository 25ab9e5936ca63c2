"""WAV read/write: RIFF mono 32 kHz, IEEE float32 on write, float32 or int16 on read."""

from __future__ import annotations

import numpy as np
from scipy.io import wavfile

from .errors import FormatError
from .synth import SAMPLE_RATE, Waveform


def write_wav(path, waveform: Waveform) -> None:
    samples = np.asarray(waveform.samples, dtype=np.float32)
    if not np.all(np.isfinite(samples)):
        raise FormatError("refusing to write non-finite samples")
    wavfile.write(path, waveform.sample_rate, samples)


def read_wav(path) -> Waveform:
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise FormatError(f"{path}: malformed or unsupported WAV file: {exc}") from exc
    if rate != SAMPLE_RATE:
        raise FormatError(f"{path}: sample rate {rate}, expected {SAMPLE_RATE}")
    if data.ndim != 1:
        raise FormatError(f"{path}: expected mono, got {data.ndim} channels")
    if data.dtype == np.float32:
        samples = data
    elif data.dtype == np.int16:
        samples = (data / 32768.0).astype(np.float32)
    else:
        raise FormatError(f"{path}: unsupported sample format {data.dtype}")
    return Waveform(samples, sample_rate=rate)
