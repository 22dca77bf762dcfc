"""Losses, Adam updates, the training loop and checkpoint I/O."""
import logging
import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, DataError, NumericalError
from .model import (ModelConfig, ModelParams, PreparedBatch, coarse_head, encode,
                    path_logits, prepare_batch, refine)

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = "trajtree-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 1.0
    learning_rate: float = 1e-3
    epochs: int = 200
    seed: int = 0
    huber_delta: float = 1.0
    batch_size: int = 64
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate < 0 or not math.isfinite(self.learning_rate):
            raise ConfigError(f"learning rate must be a finite non-negative number, "
                              f"got {self.learning_rate}")
        if min(self.lambda1, self.lambda2, self.lambda3) < 0:
            raise ConfigError("loss weights must be non-negative")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        if self.huber_delta <= 0:
            raise ConfigError("huber_delta must be positive")


def total_loss(batch, params, config):
    """Weighted sum of coarse regression, path classification and refinement losses.

    The coarse head consumes the embedding of the currently most confident
    path; refinement is teacher-forced with the coarse ground truth.
    Returns ``(loss tensor, dict of component floats)``.
    """
    f_s, f_tree = encode(batch, params)
    logits = path_logits(f_s, f_tree, params)
    selected = np.argmax(logits.value, axis=1)
    coarse = coarse_head(ad.gather_rows(f_tree, selected), f_s, params)
    l_coarse = ad.huber(coarse, batch.coarse_rel, config.huber_delta)
    l_clf = ad.cross_entropy(logits, batch.labels)
    fine = refine(batch.coarse_rel, f_s, params)
    l_ref = ad.huber(fine, batch.future_rel, config.huber_delta)
    loss = ad.weighted_sum([l_coarse, l_clf, l_ref],
                           [config.lambda1, config.lambda2, config.lambda3])
    parts = {
        "loss": float(loss.value),
        "coarse": float(l_coarse.value),
        "clf": float(l_clf.value),
        "ref": float(l_ref.value),
        "top1": float(np.mean(selected == batch.labels)),
    }
    return loss, parts


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(p.value) for k, p in params}
        self.v = {k: np.zeros_like(p.value) for k, p in params}

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for k, p in self.params:
            if p.grad is None or self.lr == 0:
                continue
            g = p.grad
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            p.value = p.value - self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def make_optimizer(params, config):
    return Adam(params, lr=config.learning_rate, beta1=config.beta1,
                beta2=config.beta2, eps=config.eps)


def train_step(batch, params, optimizer, config):
    """One gradient update on ``batch``; returns the loss record."""
    params.zero_grad()
    loss, parts = total_loss(batch, params, config)
    if not math.isfinite(parts["loss"]):
        raise NumericalError(f"non-finite loss {parts}")
    ad.backward(loss)
    optimizer.step()
    if not params.all_finite():
        raise NumericalError("parameters became non-finite after the update")
    return parts


def concat_prepared(parts):
    """Merge per-window prepared batches, renumbering window groups."""
    out = PreparedBatch(
        roots=np.concatenate([p.roots for p in parts]),
        obs_flat=np.concatenate([p.obs_flat for p in parts]),
        paths=np.concatenate([p.paths for p in parts]),
        paths_flat=np.concatenate([p.paths_flat for p in parts]),
        groups=np.concatenate([np.full(p.n_agents, i) for i, p in enumerate(parts)]),
    )
    if all(p.labels is not None for p in parts):
        out.future_rel = np.concatenate([p.future_rel for p in parts])
        out.coarse_rel = np.concatenate([p.coarse_rel for p in parts])
        out.labels = np.concatenate([p.labels for p in parts])
    return out


def prepare_windows(windows, tree_config):
    """Prepare each ``(observed (n, T, 2), future (n, H, 2))`` window once."""
    out = []
    for obs, fut in windows:
        out.append(prepare_batch(obs, tree_config, future=fut))
    return out


def batches_of(prepared, batch_size, rng=None):
    """Group whole windows into batches of roughly ``batch_size`` agents."""
    order = np.arange(len(prepared)) if rng is None else rng.permutation(len(prepared))
    cur, n = [], 0
    for i in order:
        cur.append(prepared[i])
        n += prepared[i].n_agents
        if n >= batch_size:
            yield concat_prepared(cur)
            cur, n = [], 0
    if cur:
        yield concat_prepared(cur)


def fit(windows, tree_config, train_config, params=None, model_config=None,
        callback=None):
    """Train on ``windows`` (see :func:`prepare_windows`). Returns ``(params, epoch records)``.

    Each record holds agent-weighted means of the per-batch loss components.
    """
    from .model import init_params

    if not windows:
        raise DataError("no training windows")
    if params is None:
        model_config = model_config or ModelConfig(
            t_obs=windows[0][0].shape[1], depth=tree_config.depth,
            horizon=tree_config.horizon, width=tree_config.width)
        params = init_params(model_config, seed=train_config.seed)
    prepared = prepare_windows(windows, tree_config)
    optimizer = make_optimizer(params, train_config)
    rng = np.random.default_rng(train_config.seed)
    records = []
    for epoch in range(1, train_config.epochs + 1):
        sums, total = {}, 0
        for batch in batches_of(prepared, train_config.batch_size, rng):
            parts = train_step(batch, params, optimizer, train_config)
            for k, v in parts.items():
                sums[k] = sums.get(k, 0.0) + v * batch.n_agents
            total += batch.n_agents
        rec = {"epoch": epoch, **{k: v / total for k, v in sums.items()}}
        records.append(rec)
        log.debug("epoch %d loss %.5f top1 %.3f", epoch, rec["loss"], rec["top1"])
        if callback is not None:
            callback(rec)
    return params, records


def save_checkpoint(params, path):
    """Plain-text tensor dump; floats written with ``repr`` so loading is bit-exact."""
    cfg = params.config
    lines = [f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}",
             f"config t_obs={cfg.t_obs} depth={cfg.depth} horizon={cfg.horizon} "
             f"width={cfg.width} hidden={cfg.hidden}"]
    for name, t in params:
        shape = " ".join(str(n) for n in t.value.shape)
        lines.append(f"tensor {name} {t.value.ndim} {shape}".rstrip())
        lines.append(" ".join(repr(float(v)) for v in t.value.ravel()))
    lines.append("end")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path):
    with open(path, encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith(CHECKPOINT_MAGIC):
        raise DataError(f"{path}: not a trajtree checkpoint")
    version = int(lines[0].split()[1])
    if version != CHECKPOINT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    cfg = dict(kv.split("=") for kv in lines[1].split()[1:])
    config = ModelConfig(**{k: int(v) for k, v in cfg.items()})
    tensors = {}
    i = 2
    while lines[i] != "end":
        head = lines[i].split()
        name, ndim = head[1], int(head[2])
        shape = tuple(int(n) for n in head[3:3 + ndim])
        values = np.array([float(v) for v in lines[i + 1].split()], dtype=np.float64)
        tensors[name] = ad.Tensor(values.reshape(shape))
        i += 2
    return ModelParams(config, tensors)
