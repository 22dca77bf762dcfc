"""ADE/FDE metrics, best-of-K, raw-tree evaluation and selection statistics."""
import csv
import io
import json
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .coarse_gt import closest_labels_batch, coarsify_batch
from .errors import InvalidInputError
from .model import encode, predict_batch, prepare_batch, score_paths, topk_order
from .train import concat_prepared
from .tree import build_paths_batch, interpolate_batch

REPORT_COLUMNS = ("scene", "K", "depth", "width", "horizon", "ADE", "FDE", "n_agents", "unit")
CHUNK = 2048


def _pair(pred, gt):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape or pred.ndim != 2 or pred.shape[1] != 2:
        raise InvalidInputError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    return pred, gt


def ade(pred, gt):
    pred, gt = _pair(pred, gt)
    return float(np.sqrt(((pred - gt) ** 2).sum(axis=1)).mean())


def fde(pred, gt):
    pred, gt = _pair(pred, gt)
    return float(np.sqrt(((pred[-1] - gt[-1]) ** 2).sum()))


def best_of_k(preds, gt):
    """``(minADE, minFDE)`` over ``K`` predictions; the two minima are independent."""
    preds = np.asarray(preds, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if preds.ndim != 3 or preds.shape[1:] != gt.shape:
        raise InvalidInputError(f"expected (K, H, 2) predictions for gt {gt.shape}")
    a, f = kernels.displacement_errors(preds[None], gt[None])
    return float(a.min()), float(f.min())


@dataclass(frozen=True)
class MetricsReport:
    ade: float
    fde: float
    k: int
    n_agents: int
    unit: str = "meters"
    scene: str = ""
    depth: int = 0
    width: int = 1
    horizon: int = 12

    def row(self):
        return {"scene": self.scene, "K": self.k, "depth": self.depth, "width": self.width,
                "horizon": self.horizon, "ADE": self.ade, "FDE": self.fde,
                "n_agents": self.n_agents, "unit": self.unit}


def _stack(windows):
    if not windows:
        raise InvalidInputError("no windows to evaluate")
    units = {w.unit for w in windows}
    if len(units) > 1:
        raise InvalidInputError(f"refusing to mix units {sorted(units)} in one report")
    obs = np.concatenate([w.observed() for w in windows])
    fut = np.concatenate([w.future() for w in windows])
    return obs, fut, units.pop()


def raw_tree_errors(observed, future, tree_config):
    """Per-agent best-over-all-paths ``(ade (A,), fde (A,))`` without any learning."""
    ades, fdes = [], []
    for i in range(0, len(observed), CHUNK):
        obs, fut = observed[i:i + CHUNK], future[i:i + CHUNK]
        roots, paths, forward = build_paths_batch(obs, tree_config)
        trajs = interpolate_batch(roots, paths, tree_config, forward)
        a, f = kernels.displacement_errors(trajs, fut)
        ades.append(a.min(axis=1))
        fdes.append(f.min(axis=1))
    return np.concatenate(ades), np.concatenate(fdes)


def raw_tree_eval(windows, tree_config, scene=""):
    """Best-of-all-``width**depth``-paths ADE/FDE of the untrained tree, averaged per agent."""
    obs, fut, unit = _stack(windows)
    if fut.shape[1] != tree_config.horizon:
        raise InvalidInputError(
            f"windows have horizon {fut.shape[1]}, tree expects {tree_config.horizon}")
    a, f = raw_tree_errors(obs, fut, tree_config)
    return MetricsReport(float(a.mean()), float(f.mean()), tree_config.path_count, len(a),
                         unit, scene, tree_config.depth, tree_config.width,
                         tree_config.horizon)


def _prepared_chunks(windows, tree_config, with_future=True):
    cur, n = [], 0
    for w in windows:
        cur.append(prepare_batch(w.observed(), tree_config,
                                 future=w.future() if with_future else None))
        n += len(w)
        if n >= CHUNK // 8:
            yield concat_prepared(cur)
            cur, n = [], 0
    if cur:
        yield concat_prepared(cur)


def model_eval(windows, params, tree_config, k, scene=""):
    """Best-of-``k`` ADE/FDE of the trained model's top-``k`` refined trajectories."""
    _, _, unit = _stack(windows)
    ades, fdes = [], []
    for batch in _prepared_chunks(windows, tree_config):
        trajs, _, _ = predict_batch(batch, params, k)
        a, f = kernels.displacement_errors(trajs, batch.future_rel + batch.roots[:, None, :])
        ades.append(a.min(axis=1))
        fdes.append(f.min(axis=1))
    a, f = np.concatenate(ades), np.concatenate(fdes)
    return MetricsReport(float(a.mean()), float(f.mean()), k, len(a), unit, scene,
                         tree_config.depth, tree_config.width, tree_config.horizon)


def model_scorer(params):
    def score(batch):
        f_s, f_tree = encode(batch, params)
        return score_paths(f_s, f_tree, params)
    return score


def random_scorer(seed=0):
    """Uniform random confidences; top-K is then a uniformly random K-subset."""
    rng = np.random.default_rng(seed)

    def score(batch):
        p = rng.random((batch.n_agents, batch.paths.shape[1]))
        return p / p.sum(axis=1, keepdims=True)
    return score


def topk_selection_accuracy(windows, scorer, tree_config, k, criterion="fde"):
    """Percentage of agents whose closest path (to the coarse ground truth) is in the top-``k``."""
    if criterion not in ("fde", "ade"):
        raise InvalidInputError(f"criterion must be 'fde' or 'ade', got {criterion!r}")
    hits, total = 0, 0
    for batch in _prepared_chunks(windows, tree_config):
        coarse = batch.coarse_rel + batch.roots[:, None, :]
        closest = closest_labels_batch(batch.paths, coarse, criterion)
        order = topk_order(scorer(batch), k)
        hits += int(np.sum(np.any(order == closest[:, None], axis=1)))
        total += batch.n_agents
    return 100.0 * hits / total


def ablate(settings, runner):
    """Run ``runner(setting)`` for every setting; returns the list of reports in order."""
    return [runner(s) for s in settings]


def reports_csv(reports):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in reports:
        row = r.row()
        row["ADE"] = repr(row["ADE"])
        row["FDE"] = repr(row["FDE"])
        writer.writerow(row)
    return buf.getvalue()


def reports_json(reports):
    return json.dumps([r.row() for r in reports], indent=2, sort_keys=True) + "\n"


def coarse_targets(windows, tree_config):
    """Coarse ground-truth breakpoints for every agent, ``(A, depth, 2)``."""
    _, fut, _ = _stack(windows)
    return coarsify_batch(fut, tree_config.interval, tree_config.depth)
