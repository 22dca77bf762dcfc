"""Trajectory files, sliding scene windows and dataset splits.

Input files are plain text, one observation per line::

    frame_id  agent_id  x  y

separated by whitespace or tabs. Frames are assumed to be sampled at 0.4 s;
the frame-id increment is inferred per file as the most common step between
consecutive observations of the same agent.
"""
import logging
import os
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError

log = logging.getLogger(__name__)

ETH_UCY_SCENES = ("eth", "hotel", "univ", "zara1", "zara2")
UNITS = ("meters", "pixels")


@dataclass(frozen=True)
class Track:
    agent_id: int
    frames: np.ndarray
    positions: np.ndarray


@dataclass(frozen=True)
class TrajectorySample:
    agent_id: int
    observed: np.ndarray
    future: np.ndarray = None
    unit: str = "meters"


@dataclass(frozen=True)
class SceneWindow:
    start_frame: int
    samples: tuple
    scene_name: str = ""
    unit: str = "meters"

    def __post_init__(self):
        if not self.samples:
            raise DataError("a scene window needs at least one sample")
        ids = [s.agent_id for s in self.samples]
        if len(set(ids)) != len(ids):
            raise DataError(f"duplicate agent ids in window at frame {self.start_frame}")

    def __len__(self):
        return len(self.samples)

    def observed(self):
        return np.stack([s.observed for s in self.samples])

    def future(self):
        if any(s.future is None for s in self.samples):
            return None
        return np.stack([s.future for s in self.samples])

    def arrays(self):
        return self.observed(), self.future()


@dataclass(frozen=True)
class DatasetConfig:
    t_obs: int = 8
    horizon: int = 12
    stride: int = 1

    def __post_init__(self):
        if self.t_obs < 2 or self.horizon < 1 or self.stride < 1:
            raise ConfigError(f"invalid dataset config {self}")

    @property
    def window_length(self):
        return self.t_obs + self.horizon


def _parse_int(token):
    val = float(token)
    if not val.is_integer():
        raise ValueError(f"expected an integer id, got {token!r}")
    return int(val)


def load_trajectory_file(path):
    """Read a trajectory file into per-agent tracks, split at frame gaps.

    Returns a list of :class:`Track` sorted by (agent_id, first frame).
    """
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    rows, bad = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if len(parts) != 4:
            bad.append(f"line {lineno}: expected 4 fields, got {len(parts)}")
            continue
        try:
            frame, agent = _parse_int(parts[0]), _parse_int(parts[1])
            x, y = float(parts[2]), float(parts[3])
        except ValueError as exc:
            bad.append(f"line {lineno}: {exc}")
            continue
        if not (np.isfinite(x) and np.isfinite(y)):
            bad.append(f"line {lineno}: non-finite coordinate")
            continue
        rows.append((frame, agent, x, y, lineno))
    if bad:
        raise DataError(f"{path}: malformed lines:\n  " + "\n  ".join(bad))
    if not rows:
        warnings.warn(f"{path}: no trajectory rows", stacklevel=2)
        return []

    seen = {}
    per_agent = {}
    for frame, agent, x, y, lineno in rows:
        key = (frame, agent)
        if key in seen:
            raise DataError(f"{path}: duplicate frame {frame} agent {agent} "
                            f"(lines {seen[key]} and {lineno})")
        seen[key] = lineno
        per_agent.setdefault(agent, []).append((frame, x, y))

    step = infer_frame_step(per_agent)
    tracks = []
    for agent in sorted(per_agent):
        obs = sorted(per_agent[agent])
        frames = np.array([o[0] for o in obs], dtype=np.int64)
        pos = np.array([(o[1], o[2]) for o in obs], dtype=np.float64)
        cuts = np.flatnonzero(np.diff(frames) != step) + 1
        for f, p in zip(np.split(frames, cuts), np.split(pos, cuts)):
            tracks.append(Track(agent, f, p))
    return tracks


def infer_frame_step(per_agent):
    diffs = Counter()
    for obs in per_agent.values():
        frames = sorted(o[0] for o in obs)
        diffs.update(b - a for a, b in zip(frames, frames[1:]))
    if not diffs:
        return 1
    top = max(diffs.values())
    return min(d for d, c in diffs.items() if c == top)


def frame_step_of(tracks):
    return infer_frame_step({i: [(f,) for f in t.frames] for i, t in enumerate(tracks)})


def window_scenes(tracks, config, scene_name="", unit="meters"):
    """Slide a ``t_obs + horizon`` window over the frame grid of one file.

    Only agents observed at every frame of a window are kept; windows with
    no such agent are dropped.
    """
    if not tracks:
        return []
    step = frame_step_of(tracks)
    length = config.window_length
    by_track = []
    for t in tracks:
        if len(t.frames) >= length:
            by_track.append((t, {int(f): i for i, f in enumerate(t.frames)}))
    frames = np.unique(np.concatenate([t.frames for t in tracks]))
    windows = []
    for start_idx in range(0, len(frames) - length + 1, config.stride):
        grid = frames[start_idx:start_idx + length]
        if np.any(np.diff(grid) != step):
            continue
        start = int(grid[0])
        samples = []
        for t, index in by_track:
            i0 = index.get(start)
            if i0 is None or i0 + length > len(t.frames) or t.frames[i0 + length - 1] != grid[-1]:
                continue
            pos = t.positions[i0:i0 + length]
            samples.append(TrajectorySample(t.agent_id, pos[:config.t_obs].copy(),
                                            pos[config.t_obs:].copy(), unit))
        if samples:
            samples.sort(key=lambda s: s.agent_id)
            windows.append(SceneWindow(start, tuple(samples), scene_name, unit))
    return windows


def scene_files(data_dir, scene):
    """Trajectory files of one named scene.

    Looks for ``<data_dir>/<scene>/test/*.txt`` (leave-one-out bundle layout),
    then ``<data_dir>/<scene>/*.txt``, then ``<data_dir>/<scene>.txt``.
    """
    base = os.path.join(data_dir, scene)
    for d in (os.path.join(base, "test"), base):
        if os.path.isdir(d):
            files = sorted(os.path.join(d, f) for f in os.listdir(d) if f.endswith(".txt"))
            if files:
                return files
    if os.path.isfile(base + ".txt"):
        return [base + ".txt"]
    raise DataError(f"no trajectory files for scene {scene!r} under {data_dir}")


def load_windows(files, config, scene_name="", unit="meters"):
    out = []
    for path in files:
        out.extend(window_scenes(load_trajectory_file(path), config,
                                 scene_name or os.path.splitext(os.path.basename(path))[0],
                                 unit))
    return out


@dataclass
class Splits:
    train: list
    test: list
    unit: str
    train_scenes: tuple = ()
    test_scenes: tuple = ()


def leave_one_out_scenes(holdout):
    holdout = holdout.lower()
    if holdout not in ETH_UCY_SCENES:
        raise ConfigError(f"unknown scene {holdout!r}; expected one of {ETH_UCY_SCENES}")
    return tuple(s for s in ETH_UCY_SCENES if s != holdout), (holdout,)


def make_splits(data_dir, config, holdout=None, manifest=None):
    """ETH-UCY leave-one-out split (``holdout``) or a fixed split from ``manifest``."""
    if (holdout is None) == (manifest is None):
        raise ConfigError("give exactly one of holdout scene or split manifest")
    if holdout is not None:
        train_scenes, test_scenes = leave_one_out_scenes(holdout)
        train = []
        for s in train_scenes:
            train.extend(load_windows(scene_files(data_dir, s), config, s, "meters"))
        test = load_windows(scene_files(data_dir, holdout), config, holdout, "meters")
        return Splits(train, test, "meters", train_scenes, test_scenes)
    lists = read_manifest(manifest)
    root = os.path.dirname(os.path.abspath(manifest))
    resolve = lambda names: [n if os.path.isabs(n) else os.path.join(root, n) for n in names]
    return Splits(load_windows(resolve(lists["train"]), config, unit="pixels"),
                  load_windows(resolve(lists["test"]), config, unit="pixels"),
                  "pixels", tuple(lists["train"]), tuple(lists["test"]))


def read_manifest(path):
    """Split manifest: ``[train]`` / ``[test]`` section headers followed by file names."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from None
    out, section = {"train": [], "test": []}, None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section not in out:
                raise DataError(f"{path} line {lineno}: unknown section {section!r}")
            continue
        if section is None:
            raise DataError(f"{path} line {lineno}: file name outside a section")
        out[section].append(line)
    return out


def write_manifest(path, train, test):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("[train]\n" + "".join(f"{n}\n" for n in train))
        fh.write("[test]\n" + "".join(f"{n}\n" for n in test))


@dataclass(frozen=True)
class NormalizedWindow:
    window: SceneWindow
    offsets: np.ndarray = field(repr=False)

    def invert(self, points):
        """Map ``(n_agents, ..., 2)`` points back to original coordinates."""
        pts = np.asarray(points, dtype=np.float64)
        shape = (len(self.offsets),) + (1,) * (pts.ndim - 2) + (2,)
        return pts + self.offsets.reshape(shape)


def normalize_window(window):
    """Shift each agent so its last observed point is the origin."""
    samples, offsets = [], []
    for s in window.samples:
        origin = s.observed[-1].copy()
        offsets.append(origin)
        samples.append(TrajectorySample(
            s.agent_id, s.observed - origin,
            None if s.future is None else s.future - origin, s.unit))
    return NormalizedWindow(SceneWindow(window.start_frame, tuple(samples),
                                        window.scene_name, window.unit),
                            np.array(offsets))
