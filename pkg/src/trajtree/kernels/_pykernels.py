"""Vectorised numpy implementations of the geometric kernels.

Semantics are shared with the compiled ``_ckernels`` module; see
``trajtree.kernels`` for the argument conventions.
"""
import numpy as np


def _offsets(width):
    m = (width - 1) // 2
    return np.arange(m, -m - 1, -1, dtype=np.float64)


def expand_tree(roots, forward, angles, width, depth, last_scale):
    roots = np.ascontiguousarray(roots, dtype=np.float64)
    forward = np.ascontiguousarray(forward, dtype=np.float64)
    angles = np.ascontiguousarray(angles, dtype=np.float64)
    n_agents = roots.shape[0]
    offs = _offsets(width)
    n_paths = width ** depth
    paths = np.empty((n_agents, n_paths, depth, 2))

    pos = roots[:, None, :]
    dirs = forward[:, None, :]
    for k in range(depth):
        theta = offs * angles[k]
        c, s = np.cos(theta), np.sin(theta)
        x, y = dirs[..., 0:1], dirs[..., 1:2]
        seg = np.stack([c * x - s * y, s * x + c * y], axis=-1)
        seg = seg.reshape(n_agents, -1, 2)
        if k == depth - 1 and last_scale != 1.0:
            step = seg * last_scale
        else:
            step = seg
        pos = np.repeat(pos, width, axis=1) + step
        dirs = seg
        paths[:, :, k, :] = np.repeat(pos, width ** (depth - 1 - k), axis=1)
    return paths


def interpolate(roots, paths, steps):
    roots = np.asarray(roots, dtype=np.float64)
    paths = np.asarray(paths, dtype=np.float64)
    n_agents, n_paths, depth, _ = paths.shape
    horizon = int(np.sum(steps))
    out = np.empty((n_agents, n_paths, horizon, 2))
    start = np.broadcast_to(roots[:, None, :], (n_agents, n_paths, 2))
    t0 = 0
    for k in range(depth):
        n = int(steps[k])
        end = paths[:, :, k, :]
        frac = np.arange(1, n + 1, dtype=np.float64) / n
        out[:, :, t0:t0 + n, :] = (start[:, :, None, :]
                                   + frac[None, None, :, None] * (end - start)[:, :, None, :])
        # exact endpoint regardless of rounding in frac * delta
        out[:, :, t0 + n - 1, :] = end
        start = end
        t0 += n
    return out


def breakpoint_distances(paths, gt):
    paths = np.asarray(paths, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    diff = paths - gt[:, None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1)).mean(axis=-1)


def displacement_errors(preds, gt):
    preds = np.asarray(preds, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    diff = preds - gt[:, None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    return dist.mean(axis=-1), dist[..., -1]
