"""The learnable stack: encoders, interaction attention, path scoring and heads.

Data flow for a batch of ``A`` agents grouped into scene windows::

    observed (A, T_obs, 2) --obs MLP--> F_x (A, D) --attention--> F_s (A, D)
    tree paths (A, M, d, 2) --tree MLP--> F_tree (A, M, D)
    logits = <phi(F_s), psi(F_tree)>  ->  p = softmax(logits)
    coarse = coarse_head([F_tree[argmax p], F_s])      (A, d, 2)
    fine   = refine([coarse, F_s])                     (A, H, 2)

All coordinates fed to the network are relative to each agent's last
observed position.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .coarse_gt import closest_labels_batch, coarsify_batch
from .errors import ConfigError, InvalidInputError
from .tree import build_paths_batch

MLP_NAMES = ("obs", "tree", "coarse", "refine")


@dataclass(frozen=True)
class ModelConfig:
    t_obs: int = 8
    depth: int = 3
    horizon: int = 12
    width: int = 3
    hidden: int = 64

    def __post_init__(self):
        if min(self.t_obs, self.horizon, self.width, self.hidden) < 1 or self.t_obs < 2:
            raise ConfigError(f"invalid model config {self}")
        if self.depth < 1:
            raise ConfigError("the learnable model needs a tree of depth >= 1")

    @property
    def path_count(self):
        return self.width ** self.depth

    def mlp_dims(self, name):
        d = self.hidden
        return {
            "obs": (2 * self.t_obs, d, d, d),
            "tree": (2 * self.depth, d, d, d),
            "coarse": (2 * d, d, d, 2 * self.depth),
            "refine": (2 * self.depth + d, d, d, 2 * self.horizon),
        }[name]


class ModelParams:
    """Named parameter tensors in a fixed order."""

    def __init__(self, config, tensors):
        self.config = config
        self.tensors = dict(tensors)
        for name, t in self.tensors.items():
            t.requires_grad = True
            t.name = name

    def __getitem__(self, name):
        return self.tensors[name]

    def __iter__(self):
        return iter(self.tensors.items())

    def __len__(self):
        return len(self.tensors)

    @property
    def size(self):
        return sum(t.value.size for t in self.tensors.values())

    def zero_grad(self):
        for t in self.tensors.values():
            t.zero_grad()

    def copy(self):
        return ModelParams(self.config,
                           {k: ad.Tensor(t.value.copy()) for k, t in self.tensors.items()})

    def flat_values(self):
        return np.concatenate([t.value.ravel() for t in self.tensors.values()])

    def all_finite(self):
        return all(np.all(np.isfinite(t.value)) for t in self.tensors.values())


def init_params(config, seed=0):
    """Uniform(+-1/sqrt(fan_in)) weights and biases, PReLU slopes at 0.25."""
    rng = np.random.default_rng(seed)
    t = {}

    def uniform(shape, fan_in):
        bound = 1.0 / math.sqrt(fan_in)
        return ad.Tensor(rng.uniform(-bound, bound, size=shape))

    for name in MLP_NAMES:
        dims = config.mlp_dims(name)
        for layer in range(3):
            fan_in, fan_out = dims[layer], dims[layer + 1]
            t[f"{name}.w{layer}"] = uniform((fan_in, fan_out), fan_in)
            t[f"{name}.b{layer}"] = uniform((fan_out,), fan_in)
            if layer < 2:
                t[f"{name}.a{layer}"] = ad.Tensor(np.full((), 0.25))
    d = config.hidden
    for name in ("attn.q", "attn.k", "attn.v", "score.phi", "score.psi"):
        t[name] = uniform((d, d), d)
    return ModelParams(config, t)


def mlp(x, params, name):
    h = x
    for layer in range(3):
        h = ad.linear(h, params[f"{name}.w{layer}"], params[f"{name}.b{layer}"])
        if layer < 2:
            h = ad.prelu(h, params[f"{name}.a{layer}"])
    return h


def _check_last_dim(x, n, what):
    if x.shape[-1] != n:
        raise InvalidInputError(f"{what}: expected last dimension {n}, got {x.shape}")


def encode_observed(observed_flat, params):
    """``(A, 2*T_obs)`` origin-shifted coordinates -> ``(A, D)``."""
    x = ad.tensor(observed_flat)
    _check_last_dim(x, 2 * params.config.t_obs, "observed")
    return mlp(x, params, "obs")


def encode_paths(paths_flat, params):
    """``(A, M, 2*depth)`` root-relative breakpoints -> ``(A, M, D)``; weights shared across paths."""
    x = ad.tensor(paths_flat)
    _check_last_dim(x, 2 * params.config.depth, "paths")
    return mlp(x, params, "tree")


def group_mask(groups):
    groups = np.asarray(groups)
    return groups[:, None] == groups[None, :]


def interaction_attention(embeddings, params, groups=None):
    """Single-head scaled dot-product self-attention among co-present agents.

    ``groups`` assigns each row to a scene window; rows only attend within
    their own window. ``None`` means one window.
    """
    x = ad.tensor(embeddings)
    q = ad.matmul(x, params["attn.q"])
    k = ad.matmul(x, params["attn.k"])
    v = ad.matmul(x, params["attn.v"])
    scores = ad.scale(ad.matmul(q, ad.transpose(k)), 1.0 / math.sqrt(x.shape[-1]))
    mask = None if groups is None else group_mask(groups)
    return ad.matmul(ad.softmax(scores, mask), v)


def path_logits(interaction, tree_embeddings, params):
    return ad.rowdot(ad.matmul(interaction, params["score.phi"]),
                     ad.matmul(tree_embeddings, params["score.psi"]))


def softmax_np(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def score_paths(interaction, tree_embeddings, params):
    """Confidence vector over paths, ``(A, M)``."""
    return softmax_np(path_logits(interaction, tree_embeddings, params).value)


def coarse_head(selected, interaction, params):
    """Fused selected-path and interaction embeddings -> ``(A, depth, 2)``."""
    out = mlp(ad.concat([selected, interaction]), params, "coarse")
    return ad.reshape(out, (out.shape[0], params.config.depth, 2))


def refine(coarse, interaction, params):
    """Coarse breakpoints ``(A, depth, 2)`` plus interaction -> ``(A, horizon, 2)``."""
    coarse = ad.tensor(coarse)
    flat = ad.reshape(coarse, (coarse.shape[0], 2 * params.config.depth))
    out = mlp(ad.concat([flat, interaction]), params, "refine")
    return ad.reshape(out, (out.shape[0], params.config.horizon, 2))


@dataclass
class PreparedBatch:
    """Network-ready arrays for one batch of agents (root-relative)."""
    roots: np.ndarray        # (A, 2)
    obs_flat: np.ndarray     # (A, 2*T_obs)
    paths: np.ndarray        # (A, M, d, 2) absolute
    paths_flat: np.ndarray   # (A, M, 2*d) root-relative
    groups: np.ndarray       # (A,)
    future_rel: np.ndarray = None   # (A, H, 2)
    coarse_rel: np.ndarray = None   # (A, d, 2)
    labels: np.ndarray = None       # (A,)

    @property
    def n_agents(self):
        return len(self.roots)


def prepare_batch(observed, tree_config, future=None, groups=None):
    observed = np.asarray(observed, dtype=np.float64)
    n = observed.shape[0]
    roots, paths, _ = build_paths_batch(observed, tree_config)
    rel_paths = paths - roots[:, None, None, :]
    batch = PreparedBatch(
        roots=roots,
        obs_flat=(observed - roots[:, None, :]).reshape(n, -1),
        paths=paths,
        paths_flat=rel_paths.reshape(n, paths.shape[1], -1),
        groups=np.zeros(n, dtype=np.int64) if groups is None else np.asarray(groups),
    )
    if future is not None:
        future = np.asarray(future, dtype=np.float64)
        coarse = coarsify_batch(future, tree_config.interval, tree_config.depth)
        batch.future_rel = future - roots[:, None, :]
        batch.coarse_rel = coarse - roots[:, None, :]
        batch.labels = closest_labels_batch(paths, coarse)
    return batch


def encode(batch, params):
    f_x = encode_observed(batch.obs_flat, params)
    f_s = interaction_attention(f_x, params, batch.groups)
    f_tree = encode_paths(batch.paths_flat, params)
    return f_s, f_tree


def check_model_tree(params, tree_config):
    cfg = params.config
    if (cfg.depth, cfg.width, cfg.horizon) != (tree_config.depth, tree_config.width,
                                               tree_config.horizon):
        raise ConfigError(
            f"tree config (depth={tree_config.depth}, width={tree_config.width}, "
            f"horizon={tree_config.horizon}) does not match the model "
            f"(depth={cfg.depth}, width={cfg.width}, horizon={cfg.horizon})")


def topk_order(probs, k):
    """Indices of the ``k`` most confident paths per row, ties to the lower index."""
    if k > probs.shape[1] or k < 1:
        raise InvalidInputError(f"K must be in [1, {probs.shape[1]}], got {k}")
    return np.argsort(-probs, axis=1, kind="stable")[:, :k]


def predict_batch(batch, params, k):
    """Top-``k`` fine trajectories per agent.

    Returns ``(trajectories (A, k, H, 2), confidences (A, k), path_index (A, k))``
    in absolute coordinates, sorted by descending confidence.
    """
    f_s, f_tree = encode(batch, params)
    probs = score_paths(f_s, f_tree, params)
    order = topk_order(probs, k)
    trajs = []
    for j in range(k):
        sel = ad.gather_rows(f_tree, order[:, j])
        coarse = coarse_head(sel, f_s, params)
        trajs.append(refine(coarse, f_s, params).value)
    trajs = np.stack(trajs, axis=1) + batch.roots[:, None, None, :]
    conf = np.take_along_axis(probs, order, axis=1)
    return trajs, conf, order


def predict(window, params, tree_config, k):
    """Top-``k`` refined trajectories for every agent of a scene window.

    Returns ``(trajectories (n, k, H, 2), confidences (n, k), path_index (n, k))``.
    """
    check_model_tree(params, tree_config)
    if k > tree_config.path_count:
        raise InvalidInputError(f"K={k} exceeds the {tree_config.path_count} tree paths")
    batch = prepare_batch(window.observed(), tree_config)
    return predict_batch(batch, params, k)
