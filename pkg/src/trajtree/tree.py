"""Coarse trajectory trees.

A tree is rooted at the last observed position. Each level advances one
temporal interval; every node splits into ``width`` children obtained by
rotating the node's incoming segment by ``0, ±θ, ±2θ, ...``. Root-to-leaf
paths are the coarse future hypotheses.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, InvalidInputError
from .geometry import as_points, forward_direction

# Split angles per dataset, in radians. The published table prints these as
# "4/π", "6/π", "12/π", read here as π/4, π/6, π/12.
SCENE_ANGLES = {
    "eth": (math.pi / 4, math.pi / 6, math.pi / 4),
    "hotel": (math.pi / 6, math.pi / 6, math.pi / 4),
    "univ": (math.pi / 4, math.pi / 6, math.pi / 4),
    "zara1": (math.pi / 12, math.pi / 6, math.pi / 4),
    "zara2": (math.pi / 6, math.pi / 6, math.pi / 4),
    "sdd": (math.pi / 4, math.pi / 6, math.pi / 4),
}


def scene_angles(scene, depth):
    """Per-level angles for ``scene`` truncated (or padded with the last value) to ``depth``."""
    try:
        base = SCENE_ANGLES[scene.lower()]
    except KeyError:
        raise ConfigError(f"no angle preset for scene {scene!r}; "
                          f"known: {sorted(SCENE_ANGLES)}") from None
    return tuple(base[min(k, len(base) - 1)] for k in range(depth))


@dataclass(frozen=True)
class TreeConfig:
    interval: int
    depth: int
    width: int = 3
    angles: tuple = ()
    horizon: int = 12

    def __post_init__(self):
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))
        self.validate()

    def validate(self):
        for name in ("interval", "depth", "width", "horizon"):
            val = getattr(self, name)
            if not isinstance(val, (int, np.integer)) or isinstance(val, bool):
                raise ConfigError(f"{name} must be an integer, got {val!r}")
        if self.interval < 1:
            raise ConfigError(f"interval must be >= 1, got {self.interval}")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        if self.depth < 0:
            raise ConfigError(f"depth must be >= 0, got {self.depth}")
        if self.width < 1 or self.width % 2 == 0:
            raise ConfigError(f"width must be an odd positive integer, got {self.width}")
        if len(self.angles) != self.depth:
            raise ConfigError(f"expected {self.depth} angles, got {len(self.angles)}")
        if not all(math.isfinite(a) for a in self.angles):
            raise ConfigError("angles must be finite")
        if self.depth > 0 and self.depth != math.ceil(self.horizon / self.interval):
            raise ConfigError(
                f"depth {self.depth} inconsistent with ceil(horizon/interval) = "
                f"ceil({self.horizon}/{self.interval})")

    @classmethod
    def for_depth(cls, depth, horizon=12, width=3, angles=None, scene="eth"):
        """Config splitting ``horizon`` into ``depth`` segments.

        Depth 0 is the constant-velocity case with a one-step velocity.
        """
        if depth == 0:
            return cls(interval=1, depth=0, width=width, angles=(), horizon=horizon)
        interval = math.ceil(horizon / depth)
        if angles is None:
            angles = scene_angles(scene, depth)
        return cls(interval=interval, depth=depth, width=width,
                   angles=tuple(angles), horizon=horizon)

    @property
    def path_count(self):
        return self.width ** self.depth

    def segment_steps(self):
        if self.depth == 0:
            return np.zeros(0, dtype=np.int64)
        steps = np.full(self.depth, self.interval, dtype=np.int64)
        steps[-1] = self.horizon - (self.depth - 1) * self.interval
        return steps

    @property
    def last_scale(self):
        if self.depth == 0:
            return 1.0
        return float(self.segment_steps()[-1]) / self.interval

    def to_text(self):
        lines = [
            f"interval = {self.interval}",
            f"depth = {self.depth}",
            f"width = {self.width}",
            "angles = " + ", ".join(repr(a) for a in self.angles),
            f"horizon = {self.horizon}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        kv = parse_key_values(text)
        unknown = set(kv) - {"interval", "depth", "width", "angles", "horizon"}
        if unknown:
            raise ConfigError(f"unknown tree config keys: {sorted(unknown)}")
        try:
            angles = tuple(float(a) for a in kv.get("angles", "").split(",") if a.strip())
            return cls(interval=int(kv["interval"]), depth=int(kv["depth"]),
                       width=int(kv.get("width", 3)), angles=angles,
                       horizon=int(kv.get("horizon", 12)))
        except KeyError as exc:
            raise ConfigError(f"missing tree config key {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"bad tree config value: {exc}") from None


def parse_key_values(text):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


@dataclass(frozen=True)
class CoarsePath:
    breakpoints: np.ndarray
    index: int
    # forward vector for the degenerate depth-0 tree
    direction: np.ndarray = field(default=None, repr=False)

    @property
    def depth(self):
        return len(self.breakpoints)


@dataclass(frozen=True)
class CoarseTree:
    root: np.ndarray
    levels: list
    paths: np.ndarray  # (M, depth, 2)
    config: TreeConfig
    forward: np.ndarray

    @property
    def path_count(self):
        return self.paths.shape[0]

    @property
    def depth(self):
        return self.config.depth


def build_tree(observed, config):
    """Grow the coarse tree for a single observed track."""
    if not isinstance(config, TreeConfig):
        raise ConfigError("config must be a TreeConfig")
    obs = as_points(observed, "observed")
    if len(obs) < 2:
        raise InvalidInputError("need at least 2 observed points")
    root = obs[-1].copy()
    forward = forward_direction(obs, config.interval)
    paths = kernels.expand_tree(root[None], forward[None], np.asarray(config.angles),
                                config.width, config.depth, config.last_scale)[0]
    d, w = config.depth, config.width
    levels = [paths[::w ** (d - k), k - 1].copy() for k in range(1, d + 1)]
    return CoarseTree(root=root, levels=levels, paths=paths, config=config,
                      forward=forward)


def build_paths_batch(observed, config):
    """Breakpoints for many agents at once.

    ``observed`` is ``(A, T_obs, 2)``; returns ``(roots (A, 2), paths (A, M, d, 2),
    forward (A, 2))``.
    """
    obs = np.asarray(observed, dtype=np.float64)
    if obs.ndim != 3 or obs.shape[2] != 2 or obs.shape[1] < 2:
        raise InvalidInputError(f"observed must be (A, T_obs>=2, 2), got {obs.shape}")
    roots = obs[:, -1, :].copy()
    forward = batch_forward(obs, config.interval)
    paths = kernels.expand_tree(roots, forward, np.asarray(config.angles),
                                config.width, config.depth, config.last_scale)
    return roots, paths, forward


def batch_forward(obs, interval):
    """Vectorised :func:`~trajtree.geometry.forward_direction` over ``(A, T_obs, 2)``."""
    t_obs = obs.shape[1]
    if interval < t_obs:
        return obs[:, -1] - obs[:, -1 - interval]
    if interval == t_obs:
        return obs[:, -1] - obs[:, 0]
    return (obs[:, -1] - obs[:, 0]) * (interval / (t_obs - 1))


def enumerate_paths(tree):
    if tree.depth == 0:
        return [CoarsePath(np.zeros((0, 2)), 0, direction=tree.forward)]
    return [CoarsePath(tree.paths[i], i) for i in range(tree.path_count)]


def interpolate_path(root, path, horizon, interval):
    """Per-step positions along a coarse path; returns ``(horizon, 2)``."""
    if horizon < 1:
        raise InvalidInputError("horizon must be >= 1")
    root = np.asarray(root, dtype=np.float64)
    if path.depth == 0:
        if path.direction is None:
            raise InvalidInputError("depth-0 path needs a forward direction")
        t = np.arange(1, horizon + 1, dtype=np.float64)[:, None]
        return root + t * (np.asarray(path.direction) / interval)
    steps = np.full(path.depth, interval, dtype=np.int64)
    steps[-1] = horizon - (path.depth - 1) * interval
    if steps[-1] < 1 or steps[-1] > interval:
        raise InvalidInputError(
            f"horizon {horizon} incompatible with {path.depth} segments of {interval}")
    return kernels.interpolate(root[None], path.breakpoints[None, None], steps)[0, 0]


def interpolate_batch(roots, paths, config, forward=None):
    """Per-step positions for every path of every agent: ``(A, M, horizon, 2)``."""
    if config.depth == 0:
        t = np.arange(1, config.horizon + 1, dtype=np.float64)
        step = np.asarray(forward, dtype=np.float64) / config.interval
        return roots[:, None, None, :] + t[None, None, :, None] * step[:, None, None, :]
    return kernels.interpolate(roots, paths, config.segment_steps())
