"""Coarse ground truth, path measurement and classification labels."""
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidInputError
from .geometry import as_points


@dataclass(frozen=True)
class CoarseGroundTruth:
    breakpoints: np.ndarray


@dataclass(frozen=True)
class PathLabel:
    index: int
    distance: float


def breakpoint_indices(horizon, interval, depth):
    """Zero-based future indices sampled as coarse breakpoints."""
    if horizon < 1 or interval < 1:
        raise InvalidInputError("horizon and interval must be >= 1")
    if depth != math.ceil(horizon / interval):
        raise InvalidInputError(
            f"depth {depth} inconsistent with horizon {horizon} / interval {interval}")
    idx = np.arange(1, depth + 1) * interval - 1
    idx[-1] = horizon - 1
    return idx


def coarsify_gt(future, interval, depth):
    fut = as_points(future, "future")
    idx = breakpoint_indices(len(fut), interval, depth)
    return CoarseGroundTruth(fut[idx].copy())


def coarsify_batch(futures, interval, depth):
    """``(A, H, 2)`` futures -> ``(A, depth, 2)`` coarse breakpoints."""
    futures = np.asarray(futures, dtype=np.float64)
    return futures[:, breakpoint_indices(futures.shape[1], interval, depth)]


def _breakpoints(x):
    return np.asarray(getattr(x, "breakpoints", x), dtype=np.float64)


def path_distance(path, gt):
    """Mean Euclidean distance between corresponding breakpoints."""
    a, b = _breakpoints(path), _breakpoints(gt)
    if a.shape != b.shape:
        raise InvalidInputError(f"breakpoint shapes differ: {a.shape} vs {b.shape}")
    if len(a) == 0:
        return 0.0
    return float(np.sqrt(((a - b) ** 2).sum(axis=-1)).mean())


def closest_path_label(paths, gt):
    """Index of the path nearest to the coarse ground truth (lowest index on ties)."""
    bps = np.stack([_breakpoints(p) for p in paths])
    g = _breakpoints(gt)
    if bps.shape[1:] != g.shape:
        raise InvalidInputError(f"breakpoint shapes differ: {bps.shape[1:]} vs {g.shape}")
    dist = kernels.breakpoint_distances(bps[None], g[None])[0]
    i = int(np.argmin(dist))
    return PathLabel(i, float(dist[i]))


def closest_labels_batch(paths, gt, criterion="ade"):
    """Labels for a batch: ``paths (A, M, d, 2)``, ``gt (A, d, 2)`` -> ``(A,)`` ints.

    ``criterion="ade"`` uses the mean breakpoint distance, ``"fde"`` only the
    final breakpoint.
    """
    if criterion == "ade":
        dist = kernels.breakpoint_distances(paths, gt)
    elif criterion == "fde":
        dist = kernels.breakpoint_distances(paths[:, :, -1:], gt[:, -1:])
    else:
        raise InvalidInputError(f"unknown criterion {criterion!r}")
    return np.argmin(dist, axis=1)
