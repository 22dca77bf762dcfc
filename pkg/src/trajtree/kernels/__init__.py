"""Geometric hot loops: tree expansion, path interpolation and distance reductions.

A compiled Cython backend is used when it was built; otherwise the numpy
fallback in ``_pykernels`` is selected. Set ``TRAJTREE_PURE_PYTHON=1`` to
force the fallback.

All functions work on batches of agents:

expand_tree(roots (A, 2), forward (A, 2), angles (d,), width, depth, last_scale)
    -> (A, width**depth, d, 2) breakpoints of every root-to-leaf path.
interpolate(roots (A, 2), paths (A, M, d, 2), steps (d,))
    -> (A, M, sum(steps), 2) per-step positions.
breakpoint_distances(paths (A, M, d, 2), gt (A, d, 2)) -> (A, M)
displacement_errors(preds (A, K, H, 2), gt (A, H, 2)) -> ade (A, K), fde (A, K)
"""
import os

from . import _pykernels

try:
    if os.environ.get("TRAJTREE_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-python kernels requested")
    from . import _ckernels as _backend
    BACKEND = "cython"
except ImportError:
    _backend = _pykernels
    BACKEND = "numpy"

expand_tree = _backend.expand_tree
interpolate = _backend.interpolate
breakpoint_distances = _backend.breakpoint_distances
displacement_errors = _backend.displacement_errors


def backends():
    """Map of available backend name -> module (numpy always present)."""
    out = {"numpy": _pykernels}
    try:
        from . import _ckernels
        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
