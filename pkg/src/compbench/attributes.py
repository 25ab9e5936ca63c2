"""Attribute vocabulary: four per-source attributes, each discretized into 8 classes.

Continuous values are never stored in pool metadata; a class index maps to a
single representative value (bin center) and back, so scenes are reproducible
from class indices alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import RangeError, UsageError

K_CLASSES = 8

PITCH_MIDI_LO = 36.0
PITCH_MIDI_HI = 84.0
RATE_HZ_LO = 0.2
RATE_HZ_HI = 3.0
AMP_DB_LO = -26.0
AMP_DB_HI = 0.0

_EDGE_TOL = 1e-9

# rate bin edges are geometric: 0.2 * 15^(k/8), k = 0..8 (0.2 .. 3.0)
_RATE_RATIO = RATE_HZ_HI / RATE_HZ_LO  # 15


class AttributeKind(Enum):
    TIMBRE = "timbre"
    PITCH = "pitch"
    RATE = "rate"
    AMPLITUDE = "amplitude"


# fixed iteration order; also defines token-row layout (kind_offset + class)
ATTRIBUTE_KINDS = (
    AttributeKind.TIMBRE,
    AttributeKind.PITCH,
    AttributeKind.RATE,
    AttributeKind.AMPLITUDE,
)


def kind_offset(kind: AttributeKind) -> int:
    return ATTRIBUTE_KINDS.index(kind) * K_CLASSES


def class_universe() -> list[tuple[AttributeKind, int]]:
    """All 32 (kind, class) pairs: timbre 0..7, pitch 0..7, rate 0..7, amplitude 0..7."""
    return [(kind, k) for kind in ATTRIBUTE_KINDS for k in range(K_CLASSES)]


def _check_class(k: int) -> None:
    if not 0 <= k < K_CLASSES:
        raise RangeError(f"class index {k} outside [0, {K_CLASSES - 1}]")


def discretize(kind: AttributeKind, value: float) -> int:
    """Map a continuous attribute value to its class index.

    Bins are half-open [lo, hi) except the last, closed at the range top.
    Values within 1e-9 of a bin edge snap to that edge. Timbre is not a
    continuum and is rejected.
    """
    if kind is AttributeKind.TIMBRE:
        raise UsageError("timbre classes are chosen directly, not discretized")
    if kind is AttributeKind.PITCH:
        x = (value - PITCH_MIDI_LO) / 6.0
        lo, hi = PITCH_MIDI_LO, PITCH_MIDI_HI
        span = 6.0
    elif kind is AttributeKind.RATE:
        if value <= 0:
            raise RangeError(f"rate {value} Hz out of range [{RATE_HZ_LO}, {RATE_HZ_HI}]")
        x = K_CLASSES * math.log(value / RATE_HZ_LO) / math.log(_RATE_RATIO)
        lo, hi, span = RATE_HZ_LO, RATE_HZ_HI, None
    else:
        x = (value - AMP_DB_LO) / 3.25
        lo, hi, span = AMP_DB_LO, AMP_DB_HI, 3.25
    # snap to the nearest integer edge before flooring, so exact edges are stable
    if abs(x - round(x)) < 1e-8:
        x = float(round(x))
    if x < 0.0 or x > K_CLASSES:
        raise RangeError(f"{kind.value} value {value} outside [{lo}, {hi}]")
    k = math.floor(x)
    if k == K_CLASSES:  # exact range top closes into the last bin
        k = K_CLASSES - 1
    return k


def representative(kind: AttributeKind, klass: int) -> float:
    """Bin-center value a class is synthesized at.

    Pitch: arithmetic midpoint in MIDI. Rate: geometric midpoint in Hz.
    Amplitude: arithmetic midpoint in dB, returned as linear gain.
    """
    if kind is AttributeKind.TIMBRE:
        raise UsageError("timbre has no continuous representative")
    _check_class(klass)
    if kind is AttributeKind.PITCH:
        return PITCH_MIDI_LO + (klass + 0.5) * 6.0
    if kind is AttributeKind.RATE:
        return RATE_HZ_LO * _RATE_RATIO ** ((klass + 0.5) / K_CLASSES)
    db = AMP_DB_LO + (klass + 0.5) * 3.25
    return 10.0 ** (db / 20.0)


@dataclass(frozen=True)
class Source:
    """One sound event: four class indices plus their realized continuous values."""

    timbre_class: int
    pitch_class: int
    rate_class: int
    amp_class: int
    pitch_midi: float
    rate_hz: float
    gain_linear: float

    def __post_init__(self):
        for k in (self.timbre_class, self.pitch_class, self.rate_class, self.amp_class):
            _check_class(k)
        if not 0.0 < self.gain_linear <= 1.0:
            raise RangeError(f"gain {self.gain_linear} outside (0, 1]")

    @property
    def class_indices(self) -> tuple[int, int, int, int]:
        return (self.timbre_class, self.pitch_class, self.rate_class, self.amp_class)


def source_from_classes(t: int, p: int, r: int, a: int) -> Source:
    return Source(
        timbre_class=t,
        pitch_class=p,
        rate_class=r,
        amp_class=a,
        pitch_midi=representative(AttributeKind.PITCH, p),
        rate_hz=representative(AttributeKind.RATE, r),
        gain_linear=representative(AttributeKind.AMPLITUDE, a),
    )


@dataclass(frozen=True)
class Scene:
    """An identified multiset of sources (order is storage order, not meaning)."""

    id: str
    sources: tuple[Source, ...]

    def __post_init__(self):
        if len(self.sources) < 1:
            raise RangeError(f"scene {self.id!r} has no sources")


@dataclass(frozen=True)
class Quadruple:
    """A-COAT instance: B = A + T and D = C + T for a shared added set T."""

    id: str
    a_id: str
    b_id: str
    c_id: str
    d_id: str
    t_sources: tuple[Source, ...]

    def __post_init__(self):
        if not 1 <= len(self.t_sources) <= 3:
            raise RangeError(f"quadruple {self.id!r}: |T| must be 1..3")


def validate_quadruple(quad: Quadruple, scenes: dict[str, Scene]) -> None:
    """Check the structural invariant B = A ++ T, D = C ++ T against a scene map."""
    from .errors import DataIntegrityError

    try:
        a, b = scenes[quad.a_id], scenes[quad.b_id]
        c, d = scenes[quad.c_id], scenes[quad.d_id]
    except KeyError as exc:
        raise DataIntegrityError(f"quadruple {quad.id!r}: dangling scene id {exc}") from exc
    if b.sources != a.sources + quad.t_sources:
        raise DataIntegrityError(f"quadruple {quad.id!r}: B != A ++ T")
    if d.sources != c.sources + quad.t_sources:
        raise DataIntegrityError(f"quadruple {quad.id!r}: D != C ++ T")
    if len(b.sources) > 4 or len(d.sources) > 4:
        raise DataIntegrityError(f"quadruple {quad.id!r}: composed scene exceeds 4 sources")
