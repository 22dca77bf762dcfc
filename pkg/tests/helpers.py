"""Shared builders and finite-difference utilities for the neural tests."""
import numpy as np

from trajtree import autodiff as ad
from trajtree.model import ModelConfig, init_params

SMALL = ModelConfig(t_obs=4, depth=2, horizon=5, width=3, hidden=8)


def small_params(seed=0, config=SMALL):
    params = init_params(config, seed=seed)
    # move PReLU slopes and biases away from their defaults so every branch is exercised
    rng = np.random.default_rng(seed + 1000)
    for name, t in params:
        t.value = np.asarray(t.value + rng.normal(scale=0.1, size=t.value.shape))
    return params


def fd_check(loss_fn, tensors, rng, n_coords=12, h=1e-5):
    """Relative error between reverse-mode and central-difference gradients.

    ``loss_fn()`` rebuilds the graph and returns a scalar Tensor. Coordinates
    are sampled across ``tensors`` in proportion to their sizes. A coordinate
    whose difference quotient changes between ``h`` and ``h/100`` straddles a
    PReLU/Huber kink or an argmax switch; it is redrawn, since the derivative
    is not defined within ``h`` of it.
    """
    for t in tensors:
        t.grad = None
        t.requires_grad = True
    ad.backward(loss_fn())
    sizes = np.array([t.value.size for t in tensors], dtype=float)
    f = lambda: float(loss_fn().value)
    analytic, numeric, redrawn = [], [], 0
    while len(analytic) < n_coords:
        t = tensors[rng.choice(len(tensors), p=sizes / sizes.sum())]
        idx = np.unravel_index(int(rng.integers(t.value.size)), t.value.shape)
        num = ad.numerical_gradient(f, t.value, idx, h)
        fine = ad.numerical_gradient(f, t.value, idx, h / 100)
        if abs(num - fine) > 1e-3 * max(abs(num), abs(fine), 1e-6):
            redrawn += 1
            assert redrawn <= n_coords, "too many non-smooth coordinates"
            continue
        g = np.zeros_like(t.value) if t.grad is None else t.grad
        analytic.append(g[idx])
        numeric.append(num)
    return ad.relative_error(analytic, numeric)
