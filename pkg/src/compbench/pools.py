"""Seeded candidate-pool generation and JSONL (de)serialization.

Pools are reproducible from (task, count, seed) alone: sampling uses a single
PCG64 stream, ids are sequential, and serialization is canonical (sorted keys,
compact separators), so identical inputs give byte-identical files.
"""

from __future__ import annotations

import datetime
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .attributes import (
    Quadruple,
    Scene,
    Source,
    source_from_classes,
    validate_quadruple,
)
from .errors import DataIntegrityError, UsageError

SCHEMA_VERSION = 1

TASK_COAT = "COAT"
TASK_TRE = "TRE"


@dataclass(frozen=True)
class PoolManifest:
    task: str
    seed: int
    count: int
    schema_version: int
    created: str


def sample_source(rng: np.random.Generator) -> Source:
    t, p, r, a = (int(v) for v in rng.integers(0, 8, size=4))
    return source_from_classes(t, p, r, a)


def sample_scene(rng: np.random.Generator, n_min: int, n_max: int, scene_id: str) -> Scene:
    if not 1 <= n_min <= n_max <= 4:
        raise UsageError(f"source-count bounds ({n_min}, {n_max}) outside 1..4")
    n = int(rng.integers(n_min, n_max + 1))
    return Scene(id=scene_id, sources=tuple(sample_source(rng) for _ in range(n)))


def sample_quadruple(rng: np.random.Generator, quad_id: str) -> tuple[list[Scene], Quadruple]:
    """Draw T (1-3 sources) then bases A, C with 1..4-|T| sources each;
    B and D are materialized as base ++ T with identical source values."""
    n_t = int(rng.integers(1, 4))
    t_sources = tuple(sample_source(rng) for _ in range(n_t))
    a = sample_scene(rng, 1, 4 - n_t, f"{quad_id}a")
    c = sample_scene(rng, 1, 4 - n_t, f"{quad_id}c")
    b = Scene(id=f"{quad_id}b", sources=a.sources + t_sources)
    d = Scene(id=f"{quad_id}d", sources=c.sources + t_sources)
    quad = Quadruple(
        id=quad_id, a_id=a.id, b_id=b.id, c_id=c.id, d_id=d.id, t_sources=t_sources
    )
    return [a, b, c, d], quad


def _source_obj(s: Source) -> dict:
    return {"t": s.timbre_class, "p": s.pitch_class, "r": s.rate_class, "a": s.amp_class}


def _source_from_obj(obj: dict) -> Source:
    return source_from_classes(obj["t"], obj["p"], obj["r"], obj["a"])


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_scenes_jsonl(path, scenes) -> None:
    with open(path, "w") as fh:
        for scene in scenes:
            fh.write(_dump({"id": scene.id, "sources": [_source_obj(s) for s in scene.sources]}))
            fh.write("\n")


def load_scenes(path) -> dict[str, Scene]:
    scenes: dict[str, Scene] = {}
    with open(path) as fh:
        for line in fh:
            obj = json.loads(line)
            if obj["id"] in scenes:
                raise DataIntegrityError(f"duplicate scene id {obj['id']!r} in {path}")
            scenes[obj["id"]] = Scene(
                id=obj["id"], sources=tuple(_source_from_obj(o) for o in obj["sources"])
            )
    return scenes


def write_quads_jsonl(path, quads) -> None:
    with open(path, "w") as fh:
        for q in quads:
            fh.write(
                _dump(
                    {
                        "id": q.id,
                        "a_id": q.a_id,
                        "b_id": q.b_id,
                        "c_id": q.c_id,
                        "d_id": q.d_id,
                        "t": [_source_obj(s) for s in q.t_sources],
                    }
                )
            )
            fh.write("\n")


def load_quads(path, scenes: dict[str, Scene] | None = None) -> dict[str, Quadruple]:
    """Load quadruples; when a scene map is given, re-validate B=A++T, D=C++T."""
    quads: dict[str, Quadruple] = {}
    with open(path) as fh:
        for line in fh:
            obj = json.loads(line)
            quad = Quadruple(
                id=obj["id"],
                a_id=obj["a_id"],
                b_id=obj["b_id"],
                c_id=obj["c_id"],
                d_id=obj["d_id"],
                t_sources=tuple(_source_from_obj(o) for o in obj["t"]),
            )
            if quad.id in quads:
                raise DataIntegrityError(f"duplicate quadruple id {quad.id!r} in {path}")
            if scenes is not None:
                validate_quadruple(quad, scenes)
            quads[quad.id] = quad
    return quads


def _now_iso() -> str:
    # SOURCE_DATE_EPOCH makes manifests reproducible for byte-level comparisons
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        dt = datetime.datetime.fromtimestamp(int(epoch), tz=datetime.timezone.utc)
    else:
        dt = datetime.datetime.now(tz=datetime.timezone.utc)
    return dt.replace(microsecond=0).isoformat()


def generate_pool(task: str, count: int, seed: int, out_dir) -> PoolManifest:
    """Write scenes.jsonl (and quads.jsonl for COAT) plus manifest.json."""
    if count <= 0:
        raise UsageError(f"pool count must be positive, got {count}")
    if task not in (TASK_COAT, TASK_TRE):
        raise UsageError(f"unknown task {task!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    if task == TASK_TRE:
        scenes = (sample_scene(rng, 1, 4, f"s{i:07d}") for i in range(count))
        write_scenes_jsonl(out_dir / "scenes.jsonl", scenes)
    else:
        all_scenes: list[Scene] = []
        quads: list[Quadruple] = []
        for i in range(count):
            four, quad = sample_quadruple(rng, f"q{i:06d}")
            all_scenes.extend(four)
            quads.append(quad)
        write_scenes_jsonl(out_dir / "scenes.jsonl", all_scenes)
        write_quads_jsonl(out_dir / "quads.jsonl", quads)
    manifest = PoolManifest(
        task=task, seed=seed, count=count, schema_version=SCHEMA_VERSION, created=_now_iso()
    )
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(manifest.__dict__, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return manifest


def load_manifest(path) -> PoolManifest:
    with open(path) as fh:
        return PoolManifest(**json.load(fh))


def pool_digest(manifest: PoolManifest) -> str:
    """Content digest of a pool identity (excludes the creation timestamp)."""
    import hashlib

    key = _dump({"task": manifest.task, "seed": manifest.seed, "count": manifest.count,
                 "schema_version": manifest.schema_version})
    return hashlib.sha256(key.encode()).hexdigest()[:16]
