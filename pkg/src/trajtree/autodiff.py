"""A small reverse-mode autodiff tape over numpy arrays.

Only the operations the trajectory model needs are provided. Every op
returns a :class:`Tensor` whose ``_backward`` closure pushes the upstream
gradient into its parents; :func:`backward` walks the graph in reverse
topological order.
"""
import numpy as np

from .errors import InvalidInputError


class Tensor:
    __slots__ = ("value", "grad", "parents", "_backward", "requires_grad", "name")

    def __init__(self, value, requires_grad=False, parents=(), backward=None, name=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self._backward = backward
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        label = f" {self.name}" if self.name else ""
        return f"Tensor{label}(shape={self.value.shape})"

    def _accumulate(self, g):
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def zero_grad(self):
        self.grad = None


def tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def backward(loss):
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every tensor requiring grad."""
    order, seen = [], set()
    stack = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.value)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def add(a, b):
    a, b = tensor(a), tensor(b)
    out = Tensor(a.value + b.value, parents=(a, b))

    def _bw(g):
        a._accumulate(_unbroadcast(g, a.shape))
        b._accumulate(_unbroadcast(g, b.shape))
    out._backward = _bw
    return out


def sub(a, b):
    return add(a, scale(b, -1.0))


def scale(a, c):
    """Multiply by a python/numpy constant."""
    a = tensor(a)
    out = Tensor(a.value * c, parents=(a,))
    out._backward = lambda g: a._accumulate(g * c)
    return out


def weighted_sum(terms, weights):
    out = None
    for t, w in zip(terms, weights):
        t = scale(t, w)
        out = t if out is None else add(out, t)
    return out


def matmul(x, w):
    """``x (..., k) @ w (k, m)``."""
    x, w = tensor(x), tensor(w)
    out = Tensor(x.value @ w.value, parents=(x, w))

    def _bw(g):
        x._accumulate(g @ w.value.T)
        if w.requires_grad:
            k, m = w.shape
            w._accumulate(x.value.reshape(-1, k).T @ g.reshape(-1, m))
    out._backward = _bw
    return out


def linear(x, w, b=None):
    y = matmul(x, w)
    return y if b is None else add(y, b)


def prelu(x, slope):
    x, slope = tensor(x), tensor(slope)
    pos = x.value > 0
    out = Tensor(np.where(pos, x.value, slope.value * x.value), parents=(x, slope))

    def _bw(g):
        x._accumulate(np.where(pos, g, slope.value * g))
        slope._accumulate(np.sum(np.where(pos, 0.0, g * x.value)).reshape(slope.shape))
    out._backward = _bw
    return out


def concat(tensors, axis=-1):
    tensors = [tensor(t) for t in tensors]
    out = Tensor(np.concatenate([t.value for t in tensors], axis=axis), parents=tuple(tensors))
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def _bw(g):
        for t, part in zip(tensors, np.split(g, sizes, axis=axis)):
            t._accumulate(part)
    out._backward = _bw
    return out


def reshape(x, shape):
    x = tensor(x)
    out = Tensor(x.value.reshape(shape), parents=(x,))
    out._backward = lambda g: x._accumulate(g.reshape(x.shape))
    return out


def transpose(x):
    x = tensor(x)
    out = Tensor(x.value.T, parents=(x,))
    out._backward = lambda g: x._accumulate(g.T)
    return out


def softmax(x, mask=None):
    """Softmax over the last axis; ``mask`` (bool, broadcastable) marks allowed entries."""
    x = tensor(x)
    z = x.value if mask is None else np.where(mask, x.value, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(y, parents=(x,))

    def _bw(g):
        x._accumulate(y * (g - np.sum(g * y, axis=-1, keepdims=True)))
    out._backward = _bw
    return out


def rowdot(a, b):
    """``a (A, D)`` against ``b (A, M, D)`` -> ``(A, M)`` inner products."""
    a, b = tensor(a), tensor(b)
    out = Tensor(np.einsum("ad,amd->am", a.value, b.value), parents=(a, b))

    def _bw(g):
        a._accumulate(np.einsum("am,amd->ad", g, b.value))
        b._accumulate(g[:, :, None] * a.value[:, None, :])
    out._backward = _bw
    return out


def gather_rows(x, idx):
    """Pick ``x[a, idx[a]]`` from ``x (A, M, D)`` -> ``(A, D)``."""
    x = tensor(x)
    idx = np.asarray(idx)
    ar = np.arange(len(idx))
    out = Tensor(x.value[ar, idx], parents=(x,))

    def _bw(g):
        full = np.zeros_like(x.value)
        np.add.at(full, (ar, idx), g)
        x._accumulate(full)
    out._backward = _bw
    return out


def huber(pred, target, delta=1.0):
    """Mean Huber loss over every coordinate."""
    pred = tensor(pred)
    target = np.asarray(getattr(target, "value", target), dtype=np.float64)
    if pred.shape != target.shape:
        raise InvalidInputError(f"shape mismatch: {pred.shape} vs {target.shape}")
    e = pred.value - target
    ae = np.abs(e)
    quad = ae <= delta
    val = np.where(quad, 0.5 * e * e, delta * (ae - 0.5 * delta)).mean()
    out = Tensor(val, parents=(pred,))

    def _bw(g):
        pred._accumulate(g * np.where(quad, e, delta * np.sign(e)) / e.size)
    out._backward = _bw
    return out


def log_softmax_np(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def cross_entropy(logits, labels):
    """Mean ``-log softmax(logits)[label]`` over rows."""
    logits = tensor(logits)
    labels = np.asarray(labels)
    logp = log_softmax_np(logits.value)
    ar = np.arange(len(labels))
    out = Tensor(-logp[ar, labels].mean(), parents=(logits,))

    def _bw(g):
        d = np.exp(logp)
        d[ar, labels] -= 1.0
        logits._accumulate(g * d / len(labels))
    out._backward = _bw
    return out


def numerical_gradient(f, x, index, h=1e-5):
    """Central difference of scalar ``f()`` w.r.t. ``x[index]`` (perturbed in place)."""
    old = x[index]
    x[index] = old + h
    fp = f()
    x[index] = old - h
    fm = f()
    x[index] = old
    return (fp - fm) / (2 * h)


def relative_error(analytic, numeric):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / denom)


def inner(x, weights):
    """Scalar ``sum(x * weights)`` for a constant ``weights`` array."""
    x = tensor(x)
    weights = np.asarray(weights, dtype=np.float64)
    out = Tensor(np.sum(x.value * weights), parents=(x,))
    out._backward = lambda g: x._accumulate(g * weights)
    return out
