# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled geometric kernels. Mirrors ``_pykernels`` exactly."""
import numpy as np
from libc.math cimport cos, sin, sqrt


def expand_tree(roots, forward, angles, int width, int depth, double last_scale):
    cdef double[:, ::1] r = np.ascontiguousarray(roots, dtype=np.float64)
    cdef double[:, ::1] f = np.ascontiguousarray(forward, dtype=np.float64)
    cdef double[::1] ang = np.ascontiguousarray(angles, dtype=np.float64)
    cdef Py_ssize_t n_agents = r.shape[0]
    cdef Py_ssize_t n_paths = width ** depth
    cdef int m = (width - 1) // 2
    out = np.empty((n_agents, n_paths, depth, 2))
    cdef double[:, :, :, ::1] p = out
    # per-level node state: position and incoming direction
    cdef double[:, ::1] pos = np.empty((n_paths, 2))
    cdef double[:, ::1] dirs = np.empty((n_paths, 2))
    cdef double[:, ::1] npos = np.empty((n_paths, 2))
    cdef double[:, ::1] ndirs = np.empty((n_paths, 2))
    cdef double[::1] cs = np.empty(width)
    cdef double[::1] sn = np.empty(width)
    cdef Py_ssize_t a, k, n, j, child, leaf, span, n_nodes
    cdef double x, y, sx, sy, scale, theta

    for a in range(n_agents):
        pos[0, 0] = r[a, 0]
        pos[0, 1] = r[a, 1]
        dirs[0, 0] = f[a, 0]
        dirs[0, 1] = f[a, 1]
        n_nodes = 1
        for k in range(depth):
            for j in range(width):
                theta = (m - j) * ang[k]
                cs[j] = cos(theta)
                sn[j] = sin(theta)
            scale = last_scale if k == depth - 1 else 1.0
            span = width ** (depth - 1 - k)
            for n in range(n_nodes):
                x = dirs[n, 0]
                y = dirs[n, 1]
                for j in range(width):
                    child = n * width + j
                    sx = cs[j] * x - sn[j] * y
                    sy = sn[j] * x + cs[j] * y
                    ndirs[child, 0] = sx
                    ndirs[child, 1] = sy
                    if scale != 1.0:
                        sx = sx * scale
                        sy = sy * scale
                    npos[child, 0] = pos[n, 0] + sx
                    npos[child, 1] = pos[n, 1] + sy
                    for leaf in range(child * span, (child + 1) * span):
                        p[a, leaf, k, 0] = npos[child, 0]
                        p[a, leaf, k, 1] = npos[child, 1]
            n_nodes = n_nodes * width
            pos, npos = npos, pos
            dirs, ndirs = ndirs, dirs
    return out


def interpolate(roots, paths, steps):
    cdef double[:, ::1] r = np.ascontiguousarray(roots, dtype=np.float64)
    cdef double[:, :, :, ::1] p = np.ascontiguousarray(paths, dtype=np.float64)
    cdef long[::1] st = np.ascontiguousarray(steps, dtype=np.int64)
    cdef Py_ssize_t n_agents = p.shape[0], n_paths = p.shape[1], depth = p.shape[2]
    cdef Py_ssize_t horizon = 0, k
    for k in range(depth):
        horizon += st[k]
    out = np.empty((n_agents, n_paths, horizon, 2))
    cdef double[:, :, :, ::1] o = out
    cdef Py_ssize_t a, i, t, t0, n
    cdef double x0, y0, x1, y1, frac
    for a in range(n_agents):
        for i in range(n_paths):
            x0 = r[a, 0]
            y0 = r[a, 1]
            t0 = 0
            for k in range(depth):
                n = st[k]
                x1 = p[a, i, k, 0]
                y1 = p[a, i, k, 1]
                for t in range(n - 1):
                    frac = (t + 1) / <double>n
                    o[a, i, t0 + t, 0] = x0 + frac * (x1 - x0)
                    o[a, i, t0 + t, 1] = y0 + frac * (y1 - y0)
                o[a, i, t0 + n - 1, 0] = x1
                o[a, i, t0 + n - 1, 1] = y1
                x0 = x1
                y0 = y1
                t0 += n
    return out


def breakpoint_distances(paths, gt):
    cdef double[:, :, :, ::1] p = np.ascontiguousarray(paths, dtype=np.float64)
    cdef double[:, :, ::1] g = np.ascontiguousarray(gt, dtype=np.float64)
    cdef Py_ssize_t n_agents = p.shape[0], n_paths = p.shape[1], depth = p.shape[2]
    out = np.empty((n_agents, n_paths))
    cdef double[:, ::1] o = out
    cdef Py_ssize_t a, i, k
    cdef double acc, dx, dy
    for a in range(n_agents):
        for i in range(n_paths):
            acc = 0.0
            for k in range(depth):
                dx = p[a, i, k, 0] - g[a, k, 0]
                dy = p[a, i, k, 1] - g[a, k, 1]
                acc += sqrt(dx * dx + dy * dy)
            o[a, i] = acc / depth
    return out


def displacement_errors(preds, gt):
    cdef double[:, :, :, ::1] p = np.ascontiguousarray(preds, dtype=np.float64)
    cdef double[:, :, ::1] g = np.ascontiguousarray(gt, dtype=np.float64)
    cdef Py_ssize_t n_agents = p.shape[0], n_k = p.shape[1], horizon = p.shape[2]
    ade = np.empty((n_agents, n_k))
    fde = np.empty((n_agents, n_k))
    cdef double[:, ::1] ao = ade
    cdef double[:, ::1] fo = fde
    cdef Py_ssize_t a, i, t
    cdef double acc, dx, dy, d
    for a in range(n_agents):
        for i in range(n_k):
            acc = 0.0
            d = 0.0
            for t in range(horizon):
                dx = p[a, i, t, 0] - g[a, t, 0]
                dy = p[a, i, t, 1] - g[a, t, 1]
                d = sqrt(dx * dx + dy * dy)
                acc += d
            ao[a, i] = acc / horizon
            fo[a, i] = d
    return ade, fde
