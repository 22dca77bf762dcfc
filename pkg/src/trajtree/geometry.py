"""2-D vector primitives used to grow trajectory trees.

Point sequences are ``(n, 2)`` float arrays throughout the package.
"""
import numpy as np

from .errors import InvalidInputError


def as_points(points, name="points"):
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidInputError(f"{name} must have shape (n, 2), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return arr


def velocities(observed):
    """Per-step displacements of an observed track.

    The first entry is zero: the agent is assumed still at the first step.
    """
    obs = as_points(observed, "observed")
    if len(obs) < 2:
        raise InvalidInputError("need at least 2 observed points")
    v = np.zeros_like(obs)
    v[1:] = obs[1:] - obs[:-1]
    return v


def high_order_velocity(v, interval):
    """Sum of the last ``interval`` velocity vectors."""
    v = np.asarray(v, dtype=np.float64)
    if not isinstance(interval, (int, np.integer)) or not 1 <= interval <= len(v):
        raise InvalidInputError(
            f"interval must be an integer in [1, {len(v)}], got {interval!r}")
    return v[len(v) - interval:].sum(axis=0)


def forward_direction(observed, interval):
    """Forward split vector covering ``interval`` future steps.

    Equals :func:`high_order_velocity` (computed by telescoping) when the
    observed track is long enough. Longer intervals extrapolate the mean
    per-step velocity of the real, non-padding steps.
    """
    obs = as_points(observed, "observed")
    if len(obs) < 2:
        raise InvalidInputError("need at least 2 observed points")
    if interval < 1:
        raise InvalidInputError(f"interval must be >= 1, got {interval}")
    t_obs = len(obs)
    if interval < t_obs:
        return obs[-1] - obs[-1 - interval]
    if interval == t_obs:
        return obs[-1] - obs[0]
    return (obs[-1] - obs[0]) * (interval / (t_obs - 1))


def rotation_matrix(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def rotate(vec, angle):
    """Rotate a 2-D vector (or an ``(n, 2)`` stack) counter-clockwise by ``angle`` radians."""
    vec = np.asarray(vec, dtype=np.float64)
    c, s = np.cos(angle), np.sin(angle)
    x, y = vec[..., 0], vec[..., 1]
    return np.stack([c * x - s * y, s * x + c * y], axis=-1)
