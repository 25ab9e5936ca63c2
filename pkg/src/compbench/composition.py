"""Composition model: attribute-token table + CLS + one pre-norm transformer block.

A scene's sources are embedded as sums of their four attribute-token rows,
prefixed with a learnable CLS token and passed through a single-head
self-attention + feed-forward block with no positional encoding (scenes are
multisets, so the forward pass is permutation-invariant over sources). The
CLS output is the predicted scene embedding. Forward and backward are written
directly against numpy in float64; gradients are exact and are checked against
central finite differences in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .attributes import Scene
from .errors import DegenerateInputError, UsageError

LN_EPS = 1e-5

# declared tensor order, also the checkpoint serialization order
PARAM_ORDER = (
    "token_table",
    "cls",
    "w_q",
    "w_k",
    "w_v",
    "w_o",
    "ln1_g",
    "ln1_b",
    "ln2_g",
    "ln2_b",
    "w1",
    "b1",
    "w2",
    "b2",
)

# parameters that receive decoupled weight decay (not norms, not biases)
DECAYED = ("token_table", "cls", "w_q", "w_k", "w_v", "w_o", "w1", "w2")


@dataclass(frozen=True)
class ModelConfig:
    dim: int
    hidden: int | None = None  # defaults to 4 * dim
    seed: int = 0

    @property
    def hidden_dim(self) -> int:
        h = 4 * self.dim if self.hidden is None else self.hidden
        if h < self.dim:
            raise UsageError(f"hidden dim {h} smaller than model dim {self.dim}")
        return h


def init_params(cfg: ModelConfig) -> dict[str, np.ndarray]:
    d, h = cfg.dim, cfg.hidden_dim
    rng = np.random.default_rng(cfg.seed)

    def w(*shape):
        return rng.normal(0.0, 0.02, size=shape)

    return {
        "token_table": w(32, d),
        "cls": w(d),
        "w_q": w(d, d),
        "w_k": w(d, d),
        "w_v": w(d, d),
        "w_o": w(d, d),
        "ln1_g": np.ones(d),
        "ln1_b": np.zeros(d),
        "ln2_g": np.ones(d),
        "ln2_b": np.zeros(d),
        "w1": w(d, h),
        "b1": np.zeros(h),
        "w2": w(h, d),
        "b2": np.zeros(d),
    }


def source_token_rows(source) -> tuple[int, int, int, int]:
    t, p, r, a = source.class_indices
    return (t, 8 + p, 16 + r, 24 + a)


def source_embed(source, token_table: np.ndarray) -> np.ndarray:
    rows = source_token_rows(source)
    return token_table[list(rows)].sum(axis=0)


def _gelu(x: np.ndarray) -> np.ndarray:
    return 0.5 * x * (1.0 + erf(x / math.sqrt(2.0)))


def _gelu_grad(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + erf(x / math.sqrt(2.0))) + x * np.exp(-0.5 * x * x) / math.sqrt(
        2.0 * math.pi
    )


def _layer_norm(x, gamma, beta):
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + LN_EPS)
    xhat = (x - mu) * inv_std
    return gamma * xhat + beta, xhat, inv_std


def _layer_norm_backward(dy, xhat, inv_std, gamma):
    dgamma = (dy * xhat).sum(axis=(0, 1))
    dbeta = dy.sum(axis=(0, 1))
    dxhat = dy * gamma
    dx = inv_std * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dgamma, dbeta


def _batch_inputs(params, scenes: list[Scene]):
    """Pack scenes into a padded (B, T, D) token batch plus a validity mask."""
    d = params["cls"].shape[0]
    n_tok = [len(s.sources) + 1 for s in scenes]
    t_max = max(n_tok)
    x = np.zeros((len(scenes), t_max, d))
    mask = np.zeros((len(scenes), t_max), dtype=bool)
    rows = np.full((len(scenes), t_max, 4), -1, dtype=np.int64)
    q_table = params["token_table"]
    for b, scene in enumerate(scenes):
        x[b, 0] = params["cls"]
        mask[b, : n_tok[b]] = True
        for j, src in enumerate(scene.sources):
            r = source_token_rows(src)
            rows[b, j + 1] = r
            x[b, j + 1] = q_table[list(r)].sum(axis=0)
    return x, mask, rows


def forward_batch(params, scenes: list[Scene]):
    """Run the block on a batch; returns (z_hat (B, D), cache for backward)."""
    x, mask, rows = _batch_inputs(params, scenes)
    d = x.shape[-1]
    scale = 1.0 / math.sqrt(d)

    u, xhat1, inv1 = _layer_norm(x, params["ln1_g"], params["ln1_b"])
    q = u @ params["w_q"]
    k = u @ params["w_k"]
    v = u @ params["w_v"]
    scores = np.matmul(q, k.transpose(0, 2, 1)) * scale
    scores = np.where(mask[:, None, :], scores, -1e30)
    scores -= scores.max(axis=-1, keepdims=True)
    p = np.exp(scores)
    p /= p.sum(axis=-1, keepdims=True)
    c = np.matmul(p, v)
    attn = c @ params["w_o"]
    x1 = x + attn

    v2, xhat2, inv2 = _layer_norm(x1, params["ln2_g"], params["ln2_b"])
    h0 = v2 @ params["w1"] + params["b1"]
    a = _gelu(h0)
    x2 = x1 + a @ params["w2"] + params["b2"]
    z_hat = x2[:, 0, :]

    cache = dict(
        x=x, mask=mask, rows=rows, xhat1=xhat1, inv1=inv1, u=u, q=q, k=k, v=v, p=p, c=c,
        xhat2=xhat2, inv2=inv2, v2=v2, h0=h0, a=a, scale=scale,
    )
    return z_hat, cache


def forward_scene(params, scene: Scene) -> np.ndarray:
    return forward_batch(params, [scene])[0][0]


def cosine_loss(targets: np.ndarray, z_hat: np.ndarray):
    """Mean over the batch of 1 - cos(z, z_hat); also returns dL/dz_hat."""
    z = np.asarray(targets, dtype=np.float64)
    nh = np.linalg.norm(z_hat, axis=1)
    nz = np.linalg.norm(z, axis=1)
    if np.any(nh == 0.0):
        raise DegenerateInputError("zero-norm prediction in cosine loss")
    if np.any(nz == 0.0):
        raise DegenerateInputError("zero-norm target in cosine loss")
    dots = (z * z_hat).sum(axis=1)
    cos = dots / (nz * nh)
    loss = float(np.mean(1.0 - cos))
    b = z.shape[0]
    dz_hat = -(z / (nz * nh)[:, None] - (cos / nh**2)[:, None] * z_hat) / b
    return loss, dz_hat


def backward_batch(params, cache, dz_hat: np.ndarray) -> dict[str, np.ndarray]:
    """Exact gradients of the batch loss w.r.t. every parameter tensor."""
    x, mask, rows = cache["x"], cache["mask"], cache["rows"]
    b_sz, t_max, d = x.shape
    scale = cache["scale"]

    dx2 = np.zeros_like(x)
    dx2[:, 0, :] = dz_hat

    # feed-forward sub-block
    dx1 = dx2.copy()
    df = dx2
    a2 = cache["a"].reshape(-1, cache["a"].shape[-1])
    df2 = df.reshape(-1, d)
    grads = {}
    grads["w2"] = a2.T @ df2
    grads["b2"] = df2.sum(axis=0)
    da = df @ params["w2"].T
    dh0 = da * _gelu_grad(cache["h0"])
    v2f = cache["v2"].reshape(-1, d)
    dh0f = dh0.reshape(-1, dh0.shape[-1])
    grads["w1"] = v2f.T @ dh0f
    grads["b1"] = dh0f.sum(axis=0)
    dv2 = dh0 @ params["w1"].T
    dx1_ln, grads["ln2_g"], grads["ln2_b"] = _layer_norm_backward(
        dv2, cache["xhat2"], cache["inv2"], params["ln2_g"]
    )
    dx1 += dx1_ln

    # attention sub-block
    dx = dx1.copy()
    dattn = dx1
    cf = cache["c"].reshape(-1, d)
    dattnf = dattn.reshape(-1, d)
    grads["w_o"] = cf.T @ dattnf
    dc = dattn @ params["w_o"].T
    p, v, q, k = cache["p"], cache["v"], cache["q"], cache["k"]
    dp = np.matmul(dc, v.transpose(0, 2, 1))
    dv = np.matmul(p.transpose(0, 2, 1), dc)
    ds = p * (dp - (dp * p).sum(axis=-1, keepdims=True))
    dq = np.matmul(ds, k) * scale
    dk = np.matmul(ds.transpose(0, 2, 1), q) * scale
    u = cache["u"]
    uf = u.reshape(-1, d)
    grads["w_q"] = uf.T @ dq.reshape(-1, d)
    grads["w_k"] = uf.T @ dk.reshape(-1, d)
    grads["w_v"] = uf.T @ dv.reshape(-1, d)
    du = dq @ params["w_q"].T + dk @ params["w_k"].T + dv @ params["w_v"].T
    dx_ln, grads["ln1_g"], grads["ln1_b"] = _layer_norm_backward(
        du, cache["xhat1"], cache["inv1"], params["ln1_g"]
    )
    dx += dx_ln

    grads["cls"] = dx[:, 0, :].sum(axis=0)
    dq_table = np.zeros_like(params["token_table"])
    valid = mask.copy()
    valid[:, 0] = False  # CLS position carries no token rows
    flat_rows = rows[valid]  # (n_sources, 4)
    flat_dx = dx[valid]  # (n_sources, d)
    np.add.at(dq_table, flat_rows.ravel(), np.repeat(flat_dx, 4, axis=0))
    grads["token_table"] = dq_table
    return grads


def loss_and_grads(params, scenes: list[Scene], targets: np.ndarray):
    z_hat, cache = forward_batch(params, scenes)
    loss, dz_hat = cosine_loss(targets, z_hat)
    grads = backward_batch(params, cache, dz_hat)
    return loss, grads, z_hat
