"""A-COAT: consistency of embedding differences under additive transformations.

The per-quadruple score is the cosine similarity of (z_B - z_A) and
(z_D - z_C). Quadruples where either difference has zero norm carry no
directional information; they are excluded from aggregates and counted.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .attributes import Quadruple, Scene
from .balance import quad_profile
from .encoders import EmbeddingSet
from .errors import DataIntegrityError

ATTR_COLUMNS = ("H_timbre_quad", "H_pitch_quad", "H_rate_quad", "H_amp_quad")


@dataclass(frozen=True)
class QuadScore:
    quad_id: str
    score: float | None  # None when degenerate
    h_quad: float
    h_per_attr: tuple[float, float, float, float]


@dataclass(frozen=True)
class CoatResult:
    encoder_name: str
    per_quad: tuple[QuadScore, ...]
    mean: float
    std: float
    n_valid: int
    n_degenerate: int


def coat_score(za, zb, zc, zd) -> float | None:
    """Cosine of the two difference vectors; None when either is zero."""
    d1 = np.asarray(zb, dtype=np.float64) - np.asarray(za, dtype=np.float64)
    d2 = np.asarray(zd, dtype=np.float64) - np.asarray(zc, dtype=np.float64)
    n1 = np.linalg.norm(d1)
    n2 = np.linalg.norm(d2)
    if n1 == 0.0 or n2 == 0.0:
        return None
    return float(np.dot(d1, d2) / (n1 * n2))


def evaluate_coat(
    embeddings: EmbeddingSet,
    quads: dict[str, Quadruple],
    scenes: dict[str, Scene],
) -> CoatResult:
    missing = sorted(
        {
            sid
            for q in quads.values()
            for sid in (q.a_id, q.b_id, q.c_id, q.d_id)
            if sid not in embeddings.vectors
        }
    )
    if missing:
        shown = ", ".join(missing[:10])
        raise DataIntegrityError(
            f"{len(missing)} scene ids lack embeddings (encoder {embeddings.encoder_name}): {shown}"
        )
    per_quad = []
    valid_scores = []
    for quad_id in sorted(quads):
        q = quads[quad_id]
        score = coat_score(
            embeddings.vectors[q.a_id],
            embeddings.vectors[q.b_id],
            embeddings.vectors[q.c_id],
            embeddings.vectors[q.d_id],
        )
        profile = quad_profile(q, scenes)
        per_quad.append(
            QuadScore(
                quad_id=quad_id,
                score=score,
                h_quad=float(profile.sum()),
                h_per_attr=tuple(float(v) for v in profile),
            )
        )
        if score is not None:
            valid_scores.append(score)
    arr = np.array(valid_scores, dtype=np.float64)
    return CoatResult(
        encoder_name=embeddings.encoder_name,
        per_quad=tuple(per_quad),
        mean=float(arr.mean()) if arr.size else float("nan"),
        std=float(arr.std(ddof=1)) if arr.size > 1 else 0.0,
        n_valid=int(arr.size),
        n_degenerate=len(per_quad) - int(arr.size),
    )


def write_coat_csv(path, result: CoatResult) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("quad_id", "score", "H_quad") + ATTR_COLUMNS)
        for qs in result.per_quad:
            score = "" if qs.score is None else repr(qs.score)
            writer.writerow(
                [qs.quad_id, score, repr(qs.h_quad)] + [repr(v) for v in qs.h_per_attr]
            )


def read_coat_csv(path) -> list[QuadScore]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                QuadScore(
                    quad_id=row["quad_id"],
                    score=float(row["score"]) if row["score"] else None,
                    h_quad=float(row["H_quad"]),
                    h_per_attr=tuple(float(row[c]) for c in ATTR_COLUMNS),
                )
            )
    return out


def write_coat_summary(path, result: CoatResult, provenance: dict) -> None:
    doc = {
        "metric": "A-COAT",
        "encoder": result.encoder_name,
        "mean": result.mean,
        "std": result.std,
        "n_valid": result.n_valid,
        "n_degenerate": result.n_degenerate,
        "provenance": provenance,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")
