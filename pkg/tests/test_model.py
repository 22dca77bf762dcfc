import math

import numpy as np
import pytest

from trajtree import autodiff as ad
from trajtree.errors import ConfigError, InvalidInputError
from trajtree.model import (ModelConfig, coarse_head, encode_observed, encode_paths,
                            init_params, interaction_attention, path_logits, predict,
                            prepare_batch, refine, score_paths, softmax_np, topk_order)
from trajtree.synthetic import synthetic_windows
from trajtree.tree import TreeConfig

from helpers import SMALL, small_params


def mlp_oracle(x, params, name):
    """Straight-line re-evaluation of the affine + PReLU chain."""
    h = np.asarray(x, dtype=float)
    for layer in range(3):
        h = h @ params[f"{name}.w{layer}"].value + params[f"{name}.b{layer}"].value
        if layer < 2:
            a = float(params[f"{name}.a{layer}"].value)
            h = np.where(h > 0, h, a * h)
    return h


def attention_oracle(x, wq, wk, wv, groups):
    """Dense per-agent loop with explicit exponentials."""
    n, d = x.shape
    q, k, v = x @ wq, x @ wk, x @ wv
    out = np.zeros_like(v)
    for i in range(n):
        members = [j for j in range(n) if groups[j] == groups[i]]
        scores = [float(q[i] @ k[j]) / math.sqrt(d) for j in members]
        top = max(scores)
        w = [math.exp(s - top) for s in scores]
        z = sum(w)
        for wj, j in zip(w, members):
            out[i] += (wj / z) * v[j]
    return out


def zero_params(config=SMALL):
    params = init_params(config)
    for _, t in params:
        t.value = np.zeros_like(t.value)
    return params


def test_zero_params_give_zero_outputs(rng):
    params = zero_params()
    x = rng.normal(size=(3, 2 * SMALL.t_obs))
    assert np.all(encode_observed(x, params).value == 0)
    f = rng.normal(size=(3, SMALL.hidden))
    assert np.all(coarse_head(f, f, params).value == 0)
    assert np.all(refine(rng.normal(size=(3, SMALL.depth, 2)), f, params).value == 0)


def test_bias_propagation_only_for_zero_input():
    params = zero_params()
    params["obs.b2"].value = np.arange(SMALL.hidden, dtype=float)
    out = encode_observed(np.zeros((2, 2 * SMALL.t_obs)), params).value
    np.testing.assert_array_equal(out, np.tile(np.arange(SMALL.hidden), (2, 1)))


def test_encoders_match_oracle(rng):
    for seed in range(10):
        params = small_params(seed)
        x = rng.normal(size=(5, 2 * SMALL.t_obs))
        np.testing.assert_allclose(encode_observed(x, params).value,
                                   mlp_oracle(x, params, "obs"), rtol=1e-12, atol=1e-12)
        p = rng.normal(size=(5, 9, 2 * SMALL.depth))
        np.testing.assert_allclose(encode_paths(p, params).value,
                                   mlp_oracle(p, params, "tree"), rtol=1e-12, atol=1e-12)


def test_encoder_shape_mismatch():
    with pytest.raises(InvalidInputError):
        encode_observed(np.zeros((1, 3)), small_params())


def test_encode_paths_weight_sharing(rng):
    params = small_params()
    one = rng.normal(size=(1, 1, 2 * SMALL.depth))
    same = encode_paths(np.repeat(one, 6, axis=1), params).value
    assert np.all(same == same[:, :1])
    paths = rng.normal(size=(2, 6, 2 * SMALL.depth))
    perm = rng.permutation(6)
    np.testing.assert_array_equal(encode_paths(paths[:, perm], params).value,
                                  encode_paths(paths, params).value[:, perm])


def test_attention_single_agent_is_value_projection(rng):
    params = small_params()
    x = rng.normal(size=(1, SMALL.hidden))
    np.testing.assert_allclose(interaction_attention(x, params).value,
                               x @ params["attn.v"].value, rtol=1e-14)


def test_attention_identical_agents(rng):
    params = small_params()
    x = np.repeat(rng.normal(size=(1, SMALL.hidden)), 2, axis=0)
    out = interaction_attention(x, params).value
    np.testing.assert_array_equal(out[0], out[1])


def test_attention_matches_dense_oracle(rng):
    for seed in range(20):
        params = small_params(seed)
        x = rng.normal(size=(7, SMALL.hidden))
        groups = rng.integers(0, 3, size=7)
        got = interaction_attention(x, params, groups).value
        want = attention_oracle(x, params["attn.q"].value, params["attn.k"].value,
                                params["attn.v"].value, groups)
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-9)


def test_score_paths_uniform_and_closed_form(rng):
    np.testing.assert_allclose(softmax_np(np.full((1, 27), 3.0)), 1 / 27, rtol=1e-15)
    np.testing.assert_allclose(softmax_np(np.array([[math.log(2), 0.0]])),
                               [[2 / 3, 1 / 3]], rtol=1e-15)
    logits = rng.normal(size=(4, 9)) * 5
    np.testing.assert_allclose(softmax_np(logits + 123.4), softmax_np(logits), atol=1e-9)


def test_score_paths_is_a_distribution(rng):
    for seed in range(20):
        params = small_params(seed)
        fs = rng.normal(size=(4, SMALL.hidden)) * 10
        ft = rng.normal(size=(4, 9, SMALL.hidden)) * 10
        p = score_paths(fs, ft, params)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-6)
        assert np.all(p >= 0) and np.all(p <= 1)


def test_argmax_invariant_to_positive_scaling(rng):
    logits = rng.normal(size=(50, 27))
    for c in (1e-3, 0.5, 7.0, 1e3):
        assert np.array_equal(np.argmax(softmax_np(c * logits), axis=1),
                              np.argmax(logits, axis=1))


def test_heads_match_oracle(rng):
    params = small_params(3)
    sel = rng.normal(size=(4, SMALL.hidden))
    fs = rng.normal(size=(4, SMALL.hidden))
    want = mlp_oracle(np.concatenate([sel, fs], 1), params, "coarse").reshape(4, SMALL.depth, 2)
    np.testing.assert_allclose(coarse_head(sel, fs, params).value, want, rtol=1e-12, atol=1e-12)
    coarse = rng.normal(size=(4, SMALL.depth, 2))
    want = mlp_oracle(np.concatenate([coarse.reshape(4, -1), fs], 1), params,
                      "refine").reshape(4, SMALL.horizon, 2)
    got = refine(coarse, fs, params).value
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)
    assert np.array_equal(got, refine(coarse, fs, params).value)


def test_topk_order_ties_to_lower_index():
    p = np.array([[0.2, 0.3, 0.3, 0.2]])
    assert topk_order(p, 4).tolist() == [[1, 2, 0, 3]]
    with pytest.raises(InvalidInputError):
        topk_order(p, 5)


@pytest.fixture(scope="module")
def window_and_params():
    tree = TreeConfig(interval=4, depth=3, width=3, angles=(0.7, 0.5, 0.7), horizon=12)
    windows, _ = synthetic_windows(2, tree, seed=4)
    params = init_params(ModelConfig(), seed=1)
    return windows[0], params, tree


def test_predict_k_equals_m(window_and_params):
    window, params, tree = window_and_params
    trajs, conf, order = predict(window, params, tree, 27)
    assert trajs.shape == (len(window), 27, 12, 2)
    assert all(sorted(row) == list(range(27)) for row in order.tolist())
    np.testing.assert_allclose(conf.sum(axis=1), 1.0, atol=1e-9)


def test_predict_top1_is_argmax(window_and_params):
    window, params, tree = window_and_params
    _, conf, order = predict(window, params, tree, 1)
    _, conf_all, order_all = predict(window, params, tree, 27)
    assert np.array_equal(order[:, 0], order_all[:, 0])
    assert np.all(np.diff(conf_all, axis=1) <= 0)


def test_predict_k_too_large(window_and_params):
    window, params, tree = window_and_params
    with pytest.raises(InvalidInputError):
        predict(window, params, tree, 28)


def test_predict_tree_mismatch(window_and_params):
    window, params, _ = window_and_params
    with pytest.raises(ConfigError):
        predict(window, params, TreeConfig(6, 2, 3, (0.5, 0.5), 12), 1)


def test_prepare_batch_labels(window_and_params):
    window, _, tree = window_and_params
    b = prepare_batch(window.observed(), tree, future=window.future())
    np.testing.assert_array_equal(b.obs_flat.reshape(len(window), -1, 2)[:, -1], 0)
    assert b.labels.shape == (len(window),)
    np.testing.assert_allclose(b.coarse_rel + b.roots[:, None], window.future()[:, [3, 7, 11]])
