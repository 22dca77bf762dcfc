"""Compiled and numpy kernels agree, and the selector honours the override."""
import os
import subprocess
import sys

import numpy as np
import pytest

from trajtree import kernels

BACKENDS = kernels.backends()
needs_two = pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled backend not built")


def _inputs(rng, a=7, m=9, d=3, h=12):
    return dict(roots=rng.normal(size=(a, 2)), forward=rng.normal(size=(a, 2)),
                paths=rng.normal(size=(a, m, d, 2)), gt_coarse=rng.normal(size=(a, d, 2)),
                preds=rng.normal(size=(a, 5, h, 2)), gt=rng.normal(size=(a, h, 2)))


@needs_two
@pytest.mark.parametrize("width,depth", [(1, 1), (3, 2), (3, 3), (5, 2), (7, 1)])
def test_expand_tree_agrees(rng, width, depth):
    x = _inputs(rng)
    angles = rng.uniform(0.1, 1.0, size=depth)
    a = BACKENDS["numpy"].expand_tree(x["roots"], x["forward"], angles, width, depth, 0.5)
    b = BACKENDS["cython"].expand_tree(x["roots"], x["forward"], angles, width, depth, 0.5)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


@needs_two
def test_interpolate_agrees(rng):
    x = _inputs(rng)
    steps = np.array([4, 4, 2])
    a = BACKENDS["numpy"].interpolate(x["roots"], x["paths"], steps)
    b = BACKENDS["cython"].interpolate(x["roots"], x["paths"], steps)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


@needs_two
def test_distances_agree(rng):
    x = _inputs(rng)
    a = BACKENDS["numpy"].breakpoint_distances(x["paths"], x["gt_coarse"])
    b = BACKENDS["cython"].breakpoint_distances(x["paths"], x["gt_coarse"])
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)
    for (ea, fa), (eb, fb) in [(BACKENDS["numpy"].displacement_errors(x["preds"], x["gt"]),
                                BACKENDS["cython"].displacement_errors(x["preds"], x["gt"]))]:
        np.testing.assert_allclose(ea, eb, rtol=0, atol=1e-12)
        np.testing.assert_allclose(fa, fb, rtol=0, atol=1e-12)


def test_displacement_errors_oracle(backend, rng):
    x = _inputs(rng)
    ade, fde = backend.displacement_errors(x["preds"], x["gt"])
    diff = x["preds"] - x["gt"][:, None]
    np.testing.assert_allclose(ade, np.hypot(diff[..., 0], diff[..., 1]).mean(-1), atol=1e-12)
    np.testing.assert_allclose(fde, np.hypot(diff[:, :, -1, 0], diff[:, :, -1, 1]), atol=1e-12)


def test_empty_batch(backend):
    ade, fde = backend.displacement_errors(np.zeros((0, 2, 3, 2)), np.zeros((0, 3, 2)))
    assert ade.shape == (0, 2) and fde.shape == (0, 2)


def test_pure_python_override():
    env = dict(os.environ, TRAJTREE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import trajtree.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
