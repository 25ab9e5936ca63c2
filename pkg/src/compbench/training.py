"""Composition-model training (Adam + decoupled weight decay, cosine-annealed
learning rate, early stopping on validation A-TRE) and A-TRE evaluation."""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .attributes import Scene
from .composition import (
    DECAYED,
    PARAM_ORDER,
    ModelConfig,
    forward_batch,
    init_params,
    loss_and_grads,
)
from .encoders import EmbeddingSet, cosine
from .errors import (
    DataIntegrityError,
    FormatError,
    TrainingDivergedError,
    UsageError,
)

CKPT_MAGIC = b"ATR1"
CKPT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    lr_start: float = 1e-4
    lr_end: float = 1e-5
    weight_decay: float = 1e-4
    batch_size: int = 64
    max_epochs: int = 20
    early_stop_patience: int = 4
    seed: int = 0

    def __post_init__(self):
        if not self.lr_start >= self.lr_end > 0:
            raise UsageError("need lr_start >= lr_end > 0")
        if self.early_stop_patience > self.max_epochs:
            raise UsageError("patience cannot exceed max_epochs")

    def lr_at(self, epoch: int) -> float:
        span = self.lr_start - self.lr_end
        return self.lr_end + 0.5 * span * (1.0 + math.cos(math.pi * epoch / self.max_epochs))


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_atre: float
    lr: float


@dataclass
class TrainResult:
    params: dict[str, np.ndarray]
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1
    best_val_atre: float = float("-inf")


def _targets_for(scenes: list[Scene], embeddings: EmbeddingSet) -> np.ndarray:
    missing = [s.id for s in scenes if s.id not in embeddings.vectors]
    if missing:
        raise DataIntegrityError(
            f"{len(missing)} scenes lack target embeddings: {', '.join(missing[:10])}"
        )
    return np.stack([embeddings.vectors[s.id] for s in scenes]).astype(np.float64)


def _mean_atre(params, scenes: list[Scene], embeddings: EmbeddingSet) -> float:
    scores = [s for _, s in tre_scores(params, scenes, embeddings)]
    return float(np.mean(scores))


def tre_scores(params, scenes: list[Scene], embeddings: EmbeddingSet):
    """Per-scene (id, cosine(z, z_hat)) pairs, batched for speed."""
    targets = _targets_for(scenes, embeddings)
    out = []
    for start in range(0, len(scenes), 256):
        chunk = scenes[start : start + 256]
        z_hat, _ = forward_batch(params, chunk)
        for i, scene in enumerate(chunk):
            out.append((scene.id, cosine(targets[start + i], z_hat[i])))
    return out


def train(
    model_cfg: ModelConfig,
    train_scenes: list[Scene],
    val_scenes: list[Scene],
    target_embeddings: EmbeddingSet,
    cfg: TrainConfig,
) -> TrainResult:
    """Fit the composition model to the encoder's embeddings.

    Per-epoch cosine-annealed learning rate, seeded shuffling, Adam moments in
    float64, decoupled weight decay on weight tensors only. The returned
    parameters are the best-validation checkpoint.
    """
    overlap = {s.id for s in train_scenes} & {s.id for s in val_scenes}
    if overlap:
        raise UsageError(f"train/val splits overlap: {sorted(overlap)[:5]}")
    params = init_params(model_cfg)
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(vv) for k, vv in params.items()}
    step = 0
    rng = np.random.default_rng(cfg.seed)
    train_targets = _targets_for(train_scenes, target_embeddings)

    result = TrainResult(params={k: p.copy() for k, p in params.items()})
    stale = 0
    for epoch in range(cfg.max_epochs):
        lr = cfg.lr_at(epoch)
        order = rng.permutation(len(train_scenes))
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch_idx = order[start : start + cfg.batch_size]
            batch = [train_scenes[i] for i in batch_idx]
            targets = train_targets[batch_idx]
            loss, grads, _ = loss_and_grads(params, batch, targets)
            if not math.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {start // cfg.batch_size}"
                )
            step += 1
            bc1 = 1.0 - cfg.beta1**step
            bc2 = 1.0 - cfg.beta2**step
            for name in PARAM_ORDER:
                g = grads[name]
                if not np.all(np.isfinite(g)):
                    raise TrainingDivergedError(
                        f"non-finite gradient in {name} at epoch {epoch}, "
                        f"batch {start // cfg.batch_size}"
                    )
                m[name] = cfg.beta1 * m[name] + (1.0 - cfg.beta1) * g
                v[name] = cfg.beta2 * v[name] + (1.0 - cfg.beta2) * g * g
                update = (m[name] / bc1) / (np.sqrt(v[name] / bc2) + cfg.eps)
                params[name] -= lr * update
                if name in DECAYED and cfg.weight_decay > 0:
                    params[name] -= lr * cfg.weight_decay * params[name]
            losses.append(loss)
        val_atre = _mean_atre(params, val_scenes, target_embeddings)
        result.history.append(
            EpochRecord(epoch=epoch, train_loss=float(np.mean(losses)), val_atre=val_atre, lr=lr)
        )
        if val_atre > result.best_val_atre:
            result.best_val_atre = val_atre
            result.best_epoch = epoch
            result.params = {k: p.copy() for k, p in params.items()}
            stale = 0
        else:
            stale += 1
            if stale >= cfg.early_stop_patience:
                break
    return result


def evaluate_tre(params, test_scenes: list[Scene], target_embeddings: EmbeddingSet):
    """Per-scene A-TRE scores plus (mean, std) over the test split."""
    pairs = tre_scores(params, test_scenes, target_embeddings)
    arr = np.array([s for _, s in pairs], dtype=np.float64)
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return pairs, float(arr.mean()), std


def write_history_csv(path, history: list[EpochRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("epoch", "train_loss", "val_atre", "lr"))
        for rec in history:
            writer.writerow((rec.epoch, repr(rec.train_loss), repr(rec.val_atre), repr(rec.lr)))


def save_checkpoint(path, params: dict[str, np.ndarray]) -> None:
    d = params["cls"].shape[0]
    h = params["b1"].shape[0]
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<III", CKPT_VERSION, d, h))
        for name in PARAM_ORDER:
            fh.write(np.ascontiguousarray(params[name], dtype="<f4").tobytes())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        if fh.read(4) != CKPT_MAGIC:
            raise FormatError(f"{path}: not a composition-model checkpoint")
        version, d, h = struct.unpack("<III", fh.read(12))
        if version != CKPT_VERSION:
            raise FormatError(f"{path}: unsupported checkpoint version {version}")
        shapes = {
            "token_table": (32, d),
            "cls": (d,),
            "w_q": (d, d),
            "w_k": (d, d),
            "w_v": (d, d),
            "w_o": (d, d),
            "ln1_g": (d,),
            "ln1_b": (d,),
            "ln2_g": (d,),
            "ln2_b": (d,),
            "w1": (d, h),
            "b1": (h,),
            "w2": (h, d),
            "b2": (d,),
        }
        params = {}
        for name in PARAM_ORDER:
            shape = shapes[name]
            n = int(np.prod(shape))
            raw = fh.read(4 * n)
            if len(raw) != 4 * n:
                raise FormatError(f"{path}: truncated tensor {name}")
            params[name] = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape)
        if fh.read(1):
            raise FormatError(f"{path}: trailing bytes")
    return params
