"""2-operator FM synthesizer and scene renderer.

Scenes are 10-second mono clips at 32 kHz. Each source renders a short FM
tone repeated at its rate; sources are peak-normalized, scaled by gain, and
summed, with a conditional peak normalization applied to the mix only when it
would clip. All phase math is done in double precision so renders are
bit-reproducible; public waveforms carry float32 samples.
"""

from __future__ import annotations

import importlib.resources
import json
import math
from dataclasses import dataclass

import numpy as np

from .attributes import Scene, Source
from .errors import RangeError, UsageError

SAMPLE_RATE = 32_000
CLIP_SECONDS = 10.0
CLIP_SAMPLES = int(SAMPLE_RATE * CLIP_SECONDS)  # 320_000
FADE_SECONDS = 0.005


@dataclass(frozen=True)
class FmPatch:
    name: str
    carrier_ratio: float
    modulator_ratio: float
    modulation_index: float
    mod_env_decay: float
    amp_env: tuple[float, float, float, float]  # attack, decay, sustain level, release

    def __post_init__(self):
        if self.carrier_ratio <= 0 or self.modulator_ratio <= 0:
            raise RangeError(f"patch {self.name!r}: ratios must be positive")
        if self.modulation_index < 0:
            raise RangeError(f"patch {self.name!r}: modulation index must be >= 0")
        a, d, s, r = self.amp_env
        if min(a, d, r) < 0 or not 0.0 <= s <= 1.0:
            raise RangeError(f"patch {self.name!r}: bad amplitude envelope")


def load_patch_bank(path=None) -> list[FmPatch]:
    """Load the 8-patch timbre bank; defaults to the built-in versioned bank."""
    if path is None:
        text = importlib.resources.files("compbench.data").joinpath("patches.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    doc = json.loads(text)
    if doc.get("schema_version") != 1:
        raise RangeError(f"unsupported patch bank schema_version {doc.get('schema_version')!r}")
    patches = [
        FmPatch(
            name=p["name"],
            carrier_ratio=float(p["carrier_ratio"]),
            modulator_ratio=float(p["modulator_ratio"]),
            modulation_index=float(p["modulation_index"]),
            mod_env_decay=float(p["mod_env_decay"]),
            amp_env=tuple(float(v) for v in p["amp_env"]),
        )
        for p in doc["patches"]
    ]
    if len(patches) != 8:
        raise RangeError(f"patch bank must hold exactly 8 patches, got {len(patches)}")
    return patches


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray  # float32
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        if not np.all(np.isfinite(self.samples)):
            raise RangeError("waveform contains non-finite samples")


def midi_to_hz(midi: float) -> float:
    return 440.0 * 2.0 ** ((midi - 69.0) / 12.0)


def _adsr(n: int, env: tuple[float, float, float, float]) -> np.ndarray:
    """Attack/decay/sustain/release envelope over n samples, segments compressed
    proportionally when the tone is shorter than attack+decay+release."""
    attack, decay, sustain, release = env
    dur = n / SAMPLE_RATE
    fixed = attack + decay + release
    if fixed > dur > 0:
        scale = dur / fixed
        attack, decay, release = attack * scale, decay * scale, release * scale
    t = np.arange(n) / SAMPLE_RATE
    out = np.full(n, sustain)
    na = int(round(attack * SAMPLE_RATE))
    nd = int(round(decay * SAMPLE_RATE))
    nr = int(round(release * SAMPLE_RATE))
    if na > 0:
        na = min(na, n)
        out[:na] = t[:na] / attack
    if nd > 0:
        m = min(nd, max(0, n - na))
        seg = np.arange(nd) / nd
        out[na : na + m] = 1.0 - (1.0 - sustain) * seg[:m]
    if nr > 0 and n - nr > na + nd:
        seg = 1.0 - np.arange(1, nr + 1) / nr
        out[n - nr :] = sustain * seg
    return out


def _apply_fades(y: np.ndarray) -> None:
    nf = int(round(FADE_SECONDS * SAMPLE_RATE))
    nf = min(nf, len(y) // 2)
    if nf > 0:
        ramp = np.arange(1, nf + 1) / nf
        y[:nf] *= ramp
        y[-nf:] *= ramp[::-1]


def fm_tone(patch: FmPatch, f0_hz: float, duration_s: float) -> Waveform:
    """Render one FM tone: carrier at f0*carrier_ratio, modulator at
    f0*modulator_ratio with an exponentially decaying modulation index,
    ADSR amplitude envelope, 5 ms fades, peak normalized to 1."""
    if f0_hz <= 0:
        raise UsageError(f"f0 must be positive, got {f0_hz}")
    if duration_s <= 0:
        raise UsageError(f"duration must be positive, got {duration_s}")
    n = int(round(duration_s * SAMPLE_RATE))
    t = np.arange(n, dtype=np.float64) / SAMPLE_RATE
    fc = f0_hz * patch.carrier_ratio
    fm = f0_hz * patch.modulator_ratio
    index_env = patch.modulation_index * np.exp(-t / patch.mod_env_decay)
    y = _adsr(n, patch.amp_env) * np.sin(
        2.0 * math.pi * fc * t + index_env * np.sin(2.0 * math.pi * fm * t)
    )
    _apply_fades(y)
    peak = np.max(np.abs(y))
    if peak > 0:
        y /= peak
    return Waveform(y.astype(np.float32))


def tone_duration(rate_hz: float) -> float:
    # 50% duty cycle, capped at 1 s so slow rates stay event-like
    return min(0.5 / rate_hz, 1.0)


# fixed mixing headroom: a source's realized peak is MIX_HEADROOM * gain_linear.
# Without it, peak-aligned event collisions push most multi-source mixes past
# 1.0 and the conditional normalization destroys additive structure; 6 dB of
# headroom keeps clipping rare while leaving relative amplitude classes intact.
MIX_HEADROOM = 0.5


def render_source(
    source: Source, patches: list[FmPatch] | None = None, headroom: float = MIX_HEADROOM
) -> Waveform:
    """Repeat the source's tone at its rate across the 10 s window.

    Onsets fall at round(k / rate * sr) samples for k = 0, 1, ...; the final
    event is truncated at the clip boundary. The whole stream is
    peak-normalized then scaled by headroom * gain_linear, so the realized
    peak is proportional to the source's amplitude class.
    """
    if patches is None:
        patches = _default_bank()
    patch = patches[source.timbre_class]
    tone = fm_tone(patch, midi_to_hz(source.pitch_midi), tone_duration(source.rate_hz)).samples.astype(
        np.float64
    )
    out = np.zeros(CLIP_SAMPLES, dtype=np.float64)
    k = 0
    while True:
        onset_t = k / source.rate_hz
        if onset_t >= CLIP_SECONDS:
            break
        start = int(round(onset_t * SAMPLE_RATE))
        if start >= CLIP_SAMPLES:
            break
        stop = min(start + len(tone), CLIP_SAMPLES)
        out[start:stop] += tone[: stop - start]
        k += 1
    peak = np.max(np.abs(out))
    if peak > 0:
        out *= headroom * source.gain_linear / peak
    return Waveform(out.astype(np.float32))


def render_scene_unnormalized(scene: Scene, patches: list[FmPatch] | None = None) -> Waveform:
    """Plain sum of the rendered sources, no conditional normalization."""
    mix = np.zeros(CLIP_SAMPLES, dtype=np.float64)
    for source in scene.sources:
        mix += render_source(source, patches).samples.astype(np.float64)
    return Waveform(mix.astype(np.float32))


def render_scene_detailed(
    scene: Scene, patches: list[FmPatch] | None = None
) -> tuple[Waveform, float, bool]:
    """Render a scene; returns (waveform, pre-normalization peak, normalized?)."""
    mix = render_scene_unnormalized(scene, patches).samples.astype(np.float64)
    peak = float(np.max(np.abs(mix)))
    normalized = peak > 1.0
    if normalized:
        mix /= peak
    return Waveform(mix.astype(np.float32)), peak, normalized


def render_scene(scene: Scene, patches: list[FmPatch] | None = None) -> Waveform:
    return render_scene_detailed(scene, patches)[0]


_BANK_CACHE: list[FmPatch] | None = None


def _default_bank() -> list[FmPatch]:
    global _BANK_CACHE
    if _BANK_CACHE is None:
        _BANK_CACHE = load_patch_bank()
    return _BANK_CACHE
