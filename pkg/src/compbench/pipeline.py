"""Pipeline stages behind the CLI subcommands.

Each stage reads declared upstream artifacts, writes its outputs under the run
directory, and records a stage manifest (input hashes, seeds, duration).
Stage outputs are deterministic for a fixed config; manifests additionally
carry wall-clock fields and are the only non-reproducible files.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from pathlib import Path

import numpy as np

from . import balance as bal
from . import coat as coatmod
from . import pools as poolsmod
from . import report as reportmod
from . import training as trainmod
from .attributes import Scene
from .config import RunConfig
from .encoders import (
    EmbeddingSet,
    downsample_encode,
    random_encode,
    read_embeddings,
    write_embeddings,
)
from .errors import ConfigError, MissingArtifactError
from .synth import load_patch_bank, render_scene_detailed
from .wavio import read_wav, write_wav

STAGES = (
    "gen-pool",
    "balance",
    "synth",
    "embed",
    "eval-coat",
    "train-tre",
    "eval-tre",
    "report",
)

BASELINES = ("downsample", "random")


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(f"missing {path}: run `{producer}` first")
    return path


def _write_manifest(out: Path, stage: str, cfg: RunConfig, inputs: list[Path], t0: float) -> None:
    mdir = out / "manifests"
    mdir.mkdir(parents=True, exist_ok=True)
    doc = {
        "stage": stage,
        "config_hash": cfg.config_hash(),
        "seeds": cfg.seeds.__dict__,
        "inputs": {str(p.relative_to(out)): _sha256(p) for p in inputs},
        "duration_s": round(time.time() - t0, 3),
    }
    with open(mdir / f"{stage}.json", "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def n_workers() -> int:
    raw = os.environ.get("COMPBENCH_THREADS")
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError as exc:
        raise ConfigError(f"COMPBENCH_THREADS={raw!r} is not an integer") from exc


def _provenance(cfg: RunConfig, out: Path) -> dict:
    prov = {"config_hash": cfg.config_hash()}
    for task, sub in (("coat_pool", "coat"), ("tre_pool", "tre")):
        mpath = out / "pools" / sub / "manifest.json"
        if mpath.exists():
            prov[task] = poolsmod.pool_digest(poolsmod.load_manifest(mpath))
    return prov


def stage_gen_pool(cfg: RunConfig, out: Path) -> None:
    t0 = time.time()
    poolsmod.generate_pool(
        poolsmod.TASK_COAT, cfg.pools.coat_candidates, cfg.seeds.pool_coat, out / "pools" / "coat"
    )
    poolsmod.generate_pool(
        poolsmod.TASK_TRE, cfg.pools.tre_candidates, cfg.seeds.pool_tre, out / "pools" / "tre"
    )
    _write_manifest(out, "gen-pool", cfg, [], t0)


def _load_coat_pool(out: Path):
    scenes = poolsmod.load_scenes(_require(out / "pools/coat/scenes.jsonl", "gen-pool"))
    quads = poolsmod.load_quads(_require(out / "pools/coat/quads.jsonl", "gen-pool"), scenes)
    return scenes, quads


def _load_tre_pool(out: Path):
    return poolsmod.load_scenes(_require(out / "pools/tre/scenes.jsonl", "gen-pool"))


def stage_balance(cfg: RunConfig, out: Path) -> None:
    t0 = time.time()
    coat_scenes, quads = _load_coat_pool(out)
    tre_scenes = _load_tre_pool(out)
    bdir = out / "balance"
    bdir.mkdir(parents=True, exist_ok=True)

    quad_ids = sorted(quads)
    quad_profiles = np.stack([bal.quad_profile(quads[qid], coat_scenes) for qid in quad_ids])
    coat_target = bal.BalanceTarget(
        subset_size=cfg.balance.coat_subset, bins_per_feature=cfg.balance.bins_per_feature
    )
    coat_idx = bal.entrofy_select(quad_profiles, coat_target, cfg.seeds.balance)
    coat_selected = sorted(quad_ids[i] for i in coat_idx)
    with open(bdir / "coat_selected.json", "w") as fh:
        json.dump(
            {"ids": coat_selected, "target": coat_target.__dict__}, fh, sort_keys=True, indent=2
        )
        fh.write("\n")

    scene_ids = sorted(tre_scenes)
    scene_profiles = np.stack([bal.scene_profile(tre_scenes[sid]) for sid in scene_ids])
    tre_target = bal.BalanceTarget(
        subset_size=cfg.balance.tre_subset, bins_per_feature=cfg.balance.bins_per_feature
    )
    tre_idx = bal.entrofy_select(scene_profiles, tre_target, cfg.seeds.balance + 1)
    tre_selected = sorted(scene_ids[i] for i in tre_idx)
    with open(bdir / "tre_selected.json", "w") as fh:
        json.dump(
            {"ids": tre_selected, "target": tre_target.__dict__}, fh, sort_keys=True, indent=2
        )
        fh.write("\n")

    h_agg = np.array([bal.scene_profile(tre_scenes[sid]).sum() for sid in tre_selected])
    splits = bal.make_splits(tre_selected, h_agg, cfg.seeds.balance + 2, cfg.splits)
    with open(bdir / "splits.json", "w") as fh:
        json.dump(splits, fh, sort_keys=True, indent=2)
        fh.write("\n")
    _write_manifest(
        out, "balance", cfg,
        [out / "pools/coat/scenes.jsonl", out / "pools/coat/quads.jsonl",
         out / "pools/tre/scenes.jsonl"],
        t0,
    )


def _selected_quads(out: Path):
    with open(_require(out / "balance/coat_selected.json", "balance")) as fh:
        selected = json.load(fh)["ids"]
    coat_scenes, quads = _load_coat_pool(out)
    quads = {qid: quads[qid] for qid in selected}
    scene_ids = sorted(
        {sid for q in quads.values() for sid in (q.a_id, q.b_id, q.c_id, q.d_id)}
    )
    return {sid: coat_scenes[sid] for sid in scene_ids}, quads


def _selected_tre_scenes(out: Path) -> dict[str, Scene]:
    with open(_require(out / "balance/tre_selected.json", "balance")) as fh:
        selected = json.load(fh)["ids"]
    pool = _load_tre_pool(out)
    return {sid: pool[sid] for sid in selected}


def stage_synth(cfg: RunConfig, out: Path) -> None:
    t0 = time.time()
    patches = load_patch_bank(cfg.patch_bank)
    coat_scenes, _ = _selected_quads(out)
    tre_scenes = _selected_tre_scenes(out)
    render_log: dict[str, dict] = {}
    workers = n_workers()
    for sub, scenes in (("coat", coat_scenes), ("tre", tre_scenes)):
        adir = out / "audio" / sub
        adir.mkdir(parents=True, exist_ok=True)
        ordered = sorted(scenes)
        if workers > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=workers) as pool:
                rendered = pool.map(
                    lambda sid: render_scene_detailed(scenes[sid], patches), ordered
                )
                for sid, (waveform, peak, normalized) in zip(ordered, rendered):
                    write_wav(adir / f"{sid}.wav", waveform)
                    render_log[sid] = {"task": sub, "peak": peak, "normalized": normalized}
        else:
            for sid in ordered:
                waveform, peak, normalized = render_scene_detailed(scenes[sid], patches)
                write_wav(adir / f"{sid}.wav", waveform)
                render_log[sid] = {"task": sub, "peak": peak, "normalized": normalized}
    with open(out / "audio" / "render_log.json", "w") as fh:
        json.dump(render_log, fh, sort_keys=True, indent=2)
        fh.write("\n")
    _write_manifest(
        out, "synth", cfg,
        [out / "balance/coat_selected.json", out / "balance/tre_selected.json"],
        t0,
    )


def _embedding_path(out: Path, encoder: str, task: str) -> Path:
    return out / "embeddings" / f"{encoder}_{task}.aeb"


def stage_embed(cfg: RunConfig, out: Path, encoders: tuple[str, ...] | None = None) -> None:
    t0 = time.time()
    names = encoders or cfg.encoders
    coat_scenes, _ = _selected_quads(out)
    tre_scenes = _selected_tre_scenes(out)
    (out / "embeddings").mkdir(parents=True, exist_ok=True)
    for name in names:
        if name not in BASELINES:
            raise ConfigError(
                f"unknown built-in encoder {name!r}; external encoders are embedded "
                "out of band and their .aeb files placed under embeddings/"
            )
        for task, scenes in (("coat", coat_scenes), ("tre", tre_scenes)):
            emb = EmbeddingSet(encoder_name=name, dim=cfg.embedding_dim)
            for sid in sorted(scenes):
                if name == "downsample":
                    wav = read_wav(_require(out / "audio" / task / f"{sid}.wav", "synth"))
                    emb.add(sid, downsample_encode(wav, cfg.embedding_dim))
                else:
                    emb.add(sid, random_encode(sid, cfg.embedding_dim, cfg.seeds.random_encoder))
            write_embeddings(_embedding_path(out, name, task), emb)
    _write_manifest(out, "embed", cfg, [], t0)


def stage_eval_coat(cfg: RunConfig, out: Path, encoders: tuple[str, ...] | None = None) -> None:
    t0 = time.time()
    names = encoders or cfg.encoders
    scenes, quads = _selected_quads(out)
    sdir = out / "scores"
    sdir.mkdir(parents=True, exist_ok=True)
    prov = _provenance(cfg, out)
    inputs = []
    for name in names:
        path = _require(_embedding_path(out, name, "coat"), "embed")
        inputs.append(path)
        emb = read_embeddings(path, encoder_name=name)
        result = coatmod.evaluate_coat(emb, quads, scenes)
        coatmod.write_coat_csv(sdir / f"coat_{name}.csv", result)
        coatmod.write_coat_summary(sdir / f"coat_{name}_summary.json", result, prov)
    _write_manifest(out, "eval-coat", cfg, inputs, t0)


def _split_scenes(out: Path, tre_scenes: dict[str, Scene]):
    with open(_require(out / "balance/splits.json", "balance")) as fh:
        splits = json.load(fh)
    return {key: [tre_scenes[sid] for sid in ids] for key, ids in splits.items()}


def stage_train_tre(cfg: RunConfig, out: Path, encoders: tuple[str, ...] | None = None) -> None:
    t0 = time.time()
    names = encoders or cfg.encoders
    tre_scenes = _selected_tre_scenes(out)
    splits = _split_scenes(out, tre_scenes)
    cdir = out / "checkpoints"
    cdir.mkdir(parents=True, exist_ok=True)
    inputs = []
    for name in names:
        path = _require(_embedding_path(out, name, "tre"), "embed")
        inputs.append(path)
        emb = read_embeddings(path, encoder_name=name)
        result = trainmod.train(
            cfg.model_config(), splits["train"], splits["val"], emb, cfg.train
        )
        trainmod.save_checkpoint(cdir / f"tre_{name}.ckpt", result.params)
        trainmod.write_history_csv(cdir / f"tre_{name}_history.csv", result.history)
    _write_manifest(out, "train-tre", cfg, inputs, t0)


def stage_eval_tre(cfg: RunConfig, out: Path, encoders: tuple[str, ...] | None = None) -> None:
    t0 = time.time()
    names = encoders or cfg.encoders
    tre_scenes = _selected_tre_scenes(out)
    splits = _split_scenes(out, tre_scenes)
    sdir = out / "scores"
    sdir.mkdir(parents=True, exist_ok=True)
    prov = _provenance(cfg, out)
    inputs = []
    for name in names:
        ckpt = _require(out / "checkpoints" / f"tre_{name}.ckpt", "train-tre")
        epath = _require(_embedding_path(out, name, "tre"), "embed")
        inputs += [ckpt, epath]
        params = trainmod.load_checkpoint(ckpt)
        emb = read_embeddings(epath, encoder_name=name)
        pairs, mean, std = trainmod.evaluate_tre(params, splits["test"], emb)
        by_id = {scene.id: scene for scene in splits["test"]}
        rows = [
            (sid, score, float(bal.scene_profile(by_id[sid]).sum())) for sid, score in pairs
        ]
        reportmod.write_tre_csv(sdir / f"tre_{name}.csv", rows)
        with open(sdir / f"tre_{name}_summary.json", "w") as fh:
            json.dump(
                {"metric": "A-TRE", "encoder": name, "mean": mean, "std": std,
                 "n": len(rows), "provenance": prov},
                fh, sort_keys=True, indent=2,
            )
            fh.write("\n")
    _write_manifest(out, "eval-tre", cfg, inputs, t0)


def stage_report(cfg: RunConfig, out: Path, encoders: tuple[str, ...] | None = None) -> None:
    t0 = time.time()
    names = encoders or cfg.encoders
    bundles = []
    inputs = []
    for name in names:
        coat_csv = _require(out / "scores" / f"coat_{name}.csv", "eval-coat")
        coat_sum = _require(out / "scores" / f"coat_{name}_summary.json", "eval-coat")
        tre_csv = _require(out / "scores" / f"tre_{name}.csv", "eval-tre")
        tre_sum = _require(out / "scores" / f"tre_{name}_summary.json", "eval-tre")
        inputs += [coat_csv, coat_sum, tre_csv, tre_sum]
        with open(coat_sum) as fh:
            cs = json.load(fh)
        with open(tre_sum) as fh:
            ts = json.load(fh)
        if cs["provenance"] != ts["provenance"]:
            from .errors import DataIntegrityError

            raise DataIntegrityError(
                f"{name}: A-COAT and A-TRE score files carry different provenance"
            )
        bundles.append(
            reportmod.EncoderScores(
                name=name,
                coat=coatmod.read_coat_csv(coat_csv),
                coat_mean=cs["mean"],
                coat_std=cs["std"],
                n_degenerate=cs["n_degenerate"],
                tre=reportmod.read_tre_csv(tre_csv),
                tre_mean=ts["mean"],
                tre_std=ts["std"],
                provenance=cs["provenance"],
            )
        )
    reportmod.build_report(bundles, out / "report", cfg.config_hash())
    _write_manifest(out, "report", cfg, inputs, t0)


def run_all(cfg: RunConfig, out: Path, encoders: tuple[str, ...] | None = None) -> None:
    stage_gen_pool(cfg, out)
    stage_balance(cfg, out)
    stage_synth(cfg, out)
    stage_embed(cfg, out, encoders)
    stage_eval_coat(cfg, out, encoders)
    stage_train_tre(cfg, out, encoders)
    stage_eval_tre(cfg, out, encoders)
    stage_report(cfg, out, encoders)
