import math

import numpy as np
import pytest

from compbench.composition import (
    DECAYED,
    LN_EPS,
    PARAM_ORDER,
    ModelConfig,
    cosine_loss,
    forward_batch,
    forward_scene,
    init_params,
    loss_and_grads,
    source_embed,
    source_token_rows,
)
from compbench.errors import DegenerateInputError, UsageError

from conftest import make_scene, random_scene


def small_params(dim=8, hidden=16, seed=0):
    return init_params(ModelConfig(dim=dim, hidden=hidden, seed=seed))


def test_source_token_rows():
    src = make_scene("s", [(1, 2, 3, 4)]).sources[0]
    assert source_token_rows(src) == (1, 10, 19, 28)


def test_source_embed_zero_table():
    src = make_scene("s", [(0, 0, 0, 0)]).sources[0]
    assert np.all(source_embed(src, np.zeros((32, 4))) == 0.0)


def test_source_embed_one_hot_rows():
    src = make_scene("s", [(0, 0, 0, 0)]).sources[0]
    table = np.eye(32)
    expected = np.zeros(32)
    expected[[0, 8, 16, 24]] = 1.0
    assert np.array_equal(source_embed(src, table), expected)


def test_source_embed_pitch_difference(rng):
    table = rng.standard_normal((32, 6))
    s1 = make_scene("a", [(2, 3, 4, 5)]).sources[0]
    s2 = make_scene("b", [(2, 6, 4, 5)]).sources[0]
    diff = source_embed(s1, table) - source_embed(s2, table)
    assert np.allclose(diff, table[8 + 3] - table[8 + 6])


def test_forward_permutation_invariance(rng):
    params = small_params(dim=16, hidden=32, seed=2)
    for i in range(100):
        scene = random_scene(rng, f"s{i}", n_min=2, n_max=4)
        z1 = forward_scene(params, scene)
        perm = rng.permutation(len(scene.sources))
        shuffled = make_scene("p", [scene.sources[j].class_indices for j in perm])
        z2 = forward_scene(params, shuffled)
        assert np.linalg.norm(z1 - z2) / np.linalg.norm(z1) < 1e-6


def test_forward_residual_only_path():
    # all weights zero: attention contributes nothing, FFN collapses to b2
    params = small_params(dim=8, hidden=16, seed=3)
    for name in ("w_q", "w_k", "w_v", "w_o", "w1", "w2", "token_table"):
        params[name][:] = 0.0
    params["b1"][:] = 0.3
    params["b2"][:] = np.arange(8) * 0.1
    scene = make_scene("s", [(0, 0, 0, 0)])
    z = forward_scene(params, scene)
    assert np.allclose(z, params["cls"] + params["b2"], atol=1e-12)


def scalar_forward(params, scene):
    """Independent re-implementation with plain Python loops (oracle)."""
    d = len(params["cls"])
    tokens = [list(params["cls"])]
    for src in scene.sources:
        rows = source_token_rows(src)
        tokens.append([sum(params["token_table"][r][i] for r in rows) for i in range(d)])
    n = len(tokens)

    def layer_norm(vec, g, b):
        mu = sum(vec) / d
        var = sum((v - mu) ** 2 for v in vec) / d
        inv = 1.0 / math.sqrt(var + LN_EPS)
        return [g[i] * (vec[i] - mu) * inv + b[i] for i in range(d)]

    def matvec(w, vec):  # vec @ w for w shaped (d, d) or (d, h)
        return [sum(vec[i] * w[i][j] for i in range(len(vec))) for j in range(len(w[0]))]

    u = [layer_norm(t, params["ln1_g"], params["ln1_b"]) for t in tokens]
    q = [matvec(params["w_q"], ui) for ui in u]
    k = [matvec(params["w_k"], ui) for ui in u]
    v = [matvec(params["w_v"], ui) for ui in u]
    scale = 1.0 / math.sqrt(d)
    x1 = []
    for i in range(n):
        logits = [sum(q[i][m] * k[j][m] for m in range(d)) * scale for j in range(n)]
        mx = max(logits)
        ws = [math.exp(l - mx) for l in logits]
        tot = sum(ws)
        ctx = [sum(ws[j] / tot * v[j][m] for j in range(n)) for m in range(d)]
        attn = matvec(params["w_o"], ctx)
        x1.append([tokens[i][m] + attn[m] for m in range(d)])
    z = []
    for i in range(n):
        v2 = layer_norm(x1[i], params["ln2_g"], params["ln2_b"])
        h0 = [hv + bv for hv, bv in zip(matvec(params["w1"], v2), params["b1"])]
        a = [0.5 * hv * (1.0 + math.erf(hv / math.sqrt(2.0))) for hv in h0]
        ff = matvec(params["w2"], a)
        z.append([x1[i][m] + ff[m] + params["b2"][m] for m in range(d)])
    return np.array(z[0])


def test_forward_matches_scalar_oracle():
    params = small_params(dim=2, hidden=4, seed=7)
    # scale weights up so attention actually discriminates between tokens
    for name in ("w_q", "w_k", "w_v", "w_o", "w1", "w2", "token_table", "cls"):
        params[name] *= 20.0
    single = make_scene("one", [(1, 2, 3, 4)])
    doubled = make_scene("two", [(1, 2, 3, 4), (1, 2, 3, 4)])
    for scene in (single, doubled):
        z = forward_scene(params, scene)
        assert np.allclose(z, scalar_forward(params, scene), atol=1e-9)
    # duplicating a source shifts the CLS softmax weighting, so the outputs
    # differ even though the duplicated keys/values coincide
    z1 = forward_scene(params, single)
    z2 = forward_scene(params, doubled)
    assert not np.allclose(z1, z2, atol=1e-9)


def test_forward_batch_matches_single(rng):
    # padding across different scene lengths must not leak into outputs
    params = small_params(dim=8, hidden=16, seed=4)
    scenes = [random_scene(rng, f"s{i}") for i in range(7)]
    z_batch, _ = forward_batch(params, scenes)
    for i, scene in enumerate(scenes):
        assert np.allclose(z_batch[i], forward_scene(params, scene), atol=1e-12)


def test_cosine_loss_values(rng):
    z = rng.standard_normal((3, 8))
    loss, _ = cosine_loss(z, z.copy())
    assert loss == pytest.approx(0.0, abs=1e-12)
    loss, _ = cosine_loss(z, -z)
    assert loss == pytest.approx(2.0, abs=1e-12)
    u = np.array([[1.0, 0.0]])
    v = np.array([[0.0, 1.0]])
    loss, _ = cosine_loss(u, v)
    assert loss == pytest.approx(1.0)


def test_cosine_loss_zero_norm():
    with pytest.raises(DegenerateInputError):
        cosine_loss(np.zeros((1, 4)), np.ones((1, 4)))
    with pytest.raises(DegenerateInputError):
        cosine_loss(np.ones((1, 4)), np.zeros((1, 4)))


def test_cosine_loss_gradient_zero_when_collinear(rng):
    z = rng.standard_normal((2, 6))
    _, dz_hat = cosine_loss(z, 2.0 * z)
    assert np.max(np.abs(dz_hat)) < 1e-12


def finite_difference_check(params, scenes, targets, n_samples, h=1e-4, seed=0):
    """Max relative error between analytic and central-difference gradients."""
    _, grads, _ = loss_and_grads(params, scenes, targets)
    rng = np.random.default_rng(seed)
    worst = 0.0
    sizes = np.array([params[name].size for name in PARAM_ORDER])
    total = sizes.sum()
    for flat in rng.choice(total, size=n_samples, replace=False):
        acc = 0
        for name in PARAM_ORDER:
            if flat < acc + params[name].size:
                idx = np.unravel_index(flat - acc, params[name].shape)
                break
            acc += params[name].size
        orig = params[name][idx]
        params[name][idx] = orig + h
        lp, _, _ = loss_and_grads(params, scenes, targets)
        params[name][idx] = orig - h
        lm, _, _ = loss_and_grads(params, scenes, targets)
        params[name][idx] = orig
        numeric = (lp - lm) / (2 * h)
        analytic = grads[name][idx]
        denom = max(abs(numeric), abs(analytic), 1e-8)
        worst = max(worst, abs(numeric - analytic) / denom)
    return worst


def test_gradients_match_finite_differences(rng):
    params = small_params(dim=8, hidden=16, seed=5)
    scenes = [random_scene(rng, f"s{i}") for i in range(6)]
    targets = rng.standard_normal((6, 8))
    assert finite_difference_check(params, scenes, targets, n_samples=80) < 1e-4


def test_unused_token_rows_have_zero_gradient(rng):
    params = small_params(dim=8, hidden=16, seed=6)
    scenes = [make_scene("s", [(0, 1, 2, 3)])]
    targets = rng.standard_normal((1, 8))
    _, grads, _ = loss_and_grads(params, scenes, targets)
    used = {0, 8 + 1, 16 + 2, 24 + 3}
    for row in range(32):
        row_grad = grads["token_table"][row]
        if row in used:
            assert np.any(row_grad != 0.0)
        else:
            assert np.all(row_grad == 0.0)


def test_param_order_and_decay_sets():
    params = small_params()
    assert set(PARAM_ORDER) == set(params)
    assert set(DECAYED) <= set(PARAM_ORDER)
    # no norms or biases receive decay
    assert not any(n.startswith(("ln", "b")) for n in DECAYED)


def test_model_config_hidden():
    assert ModelConfig(dim=8).hidden_dim == 32
    with pytest.raises(UsageError):
        ModelConfig(dim=8, hidden=4).hidden_dim
