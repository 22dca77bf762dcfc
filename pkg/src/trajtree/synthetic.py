"""Synthetic corpora whose futures are exact tree paths plus Gaussian noise.

Each agent walks straight for the part of its track that determines the
tree's forward direction. The first observed points are pushed sideways by
``code_amplitude`` segment lengths, one point per tree level, and encode
which branch the agent takes at that level. The future is the interpolated
tree path with i.i.d. Gaussian noise added to every point, so the correct
path is learnable from the observation alone.
"""
import math

import numpy as np

from .data import SceneWindow, TrajectorySample
from .errors import ConfigError
from .geometry import rotate
from .tree import TreeConfig, build_tree, interpolate_batch


def path_digits(index, width, depth):
    """Base-``width`` digits of a path index, most significant (level 1) first."""
    digits = []
    for _ in range(depth):
        digits.append(index % width)
        index //= width
    return digits[::-1]


def synthetic_windows(n_windows, tree_config, t_obs=8, agents_per_window=3,
                      segment_length=1.0, noise=0.05, code_amplitude=0.3,
                      heading_range=2 * math.pi, seed=0, unit="meters"):
    """Build ``n_windows`` scene windows; returns ``(windows, path_indices)``.

    ``noise`` is the standard deviation of the future noise in segment lengths.
    """
    cfg = tree_config
    if cfg.depth < 1:
        raise ConfigError("synthetic corpora need a tree of depth >= 1")
    code_points = t_obs - 1 - min(cfg.interval, t_obs - 1)
    if code_points < cfg.depth:
        raise ConfigError(
            f"t_obs={t_obs} leaves {code_points} free observed points, need {cfg.depth}")
    rng = np.random.default_rng(seed)
    speed = segment_length / cfg.interval
    m = (cfg.width - 1) // 2
    windows, indices = [], []
    for w in range(n_windows):
        samples = []
        for a in range(agents_per_window):
            heading = rng.uniform(-heading_range / 2, heading_range / 2)
            center = rng.uniform(-20, 20, size=2)
            direction = np.array([math.cos(heading), math.sin(heading)])
            normal = rotate(direction, math.pi / 2)
            t = np.arange(t_obs, dtype=np.float64) - (t_obs - 1)
            observed = center + t[:, None] * speed * direction
            index = int(rng.integers(cfg.path_count))
            for k, digit in enumerate(path_digits(index, cfg.width, cfg.depth)):
                observed[k] += normal * code_amplitude * segment_length * (m - digit)
            tree = build_tree(observed, cfg)
            clean = interpolate_batch(tree.root[None], tree.paths[None, index:index + 1],
                                      cfg)[0, 0]
            future = clean + rng.normal(scale=noise * segment_length, size=clean.shape)
            samples.append(TrajectorySample(w * agents_per_window + a, observed, future, unit))
            indices.append(index)
        windows.append(SceneWindow(w, tuple(samples), "synthetic", unit))
    return windows, np.array(indices)


def default_synthetic_tree(horizon=12):
    return TreeConfig(interval=4, depth=3, width=3,
                      angles=(math.pi / 4, math.pi / 6, math.pi / 4), horizon=horizon)
