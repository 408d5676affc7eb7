"""Numba-compiled implementations of the hot numeric kernels.

Importing this module requires numba; the package falls back to the numpy
backend when the import fails or EDMD_NO_NUMBA is set. The scalar loops here
perform the same floating-point operations in the same per-element order as
the vectorized numpy twins, so both backends agree on identical inputs.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def thin_plate_matrix(points, centers):
    m, dim = points.shape
    k = centers.shape[0]
    out = np.zeros((m, k))
    for i in range(m):
        for j in range(k):
            sq = 0.0
            for a in range(dim):
                d = points[i, a] - centers[j, a]
                sq += d * d
            if sq > 0.0:
                out[i, j] = 0.5 * sq * np.log(sq)
    return out


@njit(cache=True)
def kmeans_assign(points, centers):
    m, dim = points.shape
    k = centers.shape[0]
    labels = np.empty(m, dtype=np.int64)
    best = np.empty(m)
    for i in range(m):
        b = np.inf
        lab = 0
        for j in range(k):
            sq = 0.0
            for a in range(dim):
                d = points[i, a] - centers[j, a]
                sq += d * d
            if sq < b:
                b = sq
                lab = j
        labels[i] = lab
        best[i] = b
    return labels, best


@njit(cache=True)
def double_well_em(x0, noise, dt):
    m = x0.shape[0]
    n_steps = noise.shape[1]
    out = np.empty(m)
    for i in range(m):
        x = x0[i]
        for k in range(n_steps):
            f = 4.0 * x * (x * x - 1.0) * (3.0 * x * x - 1.0)
            x = x + f * dt + noise[i, k]
            while x > 1.0 or x < -1.0:
                if x > 1.0:
                    x = 2.0 - x
                else:
                    x = -2.0 - x
        out[i] = x
    return out


@njit(cache=True)
def rect_em(p0, noise, bounds):
    m, dim = p0.shape
    n_steps = noise.shape[1]
    out = p0.copy()
    for i in range(m):
        for k in range(n_steps):
            for a in range(dim):
                x = out[i, a] + noise[i, k, a]
                lo, hi = bounds[a, 0], bounds[a, 1]
                while x > hi or x < lo:
                    if x > hi:
                        x = 2.0 * hi - x
                    else:
                        x = 2.0 * lo - x
                out[i, a] = x
    return out


@njit(cache=True, inline="always")
def _duffing_acc(x, v):
    return -0.5 * v - x * (-1.0 + x * x)


@njit(cache=True)
def duffing_rk4(states, dt, n_steps):
    m = states.shape[0]
    out = np.empty_like(states)
    for i in range(m):
        x = states[i, 0]
        v = states[i, 1]
        for _ in range(n_steps):
            k1x = v
            k1v = _duffing_acc(x, v)
            x2 = x + 0.5 * dt * k1x
            v2 = v + 0.5 * dt * k1v
            k2x = v2
            k2v = _duffing_acc(x2, v2)
            x3 = x + 0.5 * dt * k2x
            v3 = v + 0.5 * dt * k2v
            k3x = v3
            k3v = _duffing_acc(x3, v3)
            x4 = x + dt * k3x
            v4 = v + dt * k3v
            k4x = v4
            k4v = _duffing_acc(x4, v4)
            x = x + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            v = v + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        out[i, 0] = x
        out[i, 1] = v
    return out


@njit(cache=True)
def duffing_basin(points, dt, t_max, tol):
    m = points.shape[0]
    labels = np.zeros(m, dtype=np.int8)
    tol_sq = tol * tol
    n_steps = int(round(t_max / dt))
    for i in range(m):
        x = points[i, 0]
        v = points[i, 1]
        for _ in range(n_steps):
            k1x = v
            k1v = _duffing_acc(x, v)
            x2 = x + 0.5 * dt * k1x
            v2 = v + 0.5 * dt * k1v
            k2x = v2
            k2v = _duffing_acc(x2, v2)
            x3 = x + 0.5 * dt * k2x
            v3 = v + 0.5 * dt * k2v
            k3x = v3
            k3v = _duffing_acc(x3, v3)
            x4 = x + dt * k3x
            v4 = v + dt * k3v
            k4x = v4
            k4v = _duffing_acc(x4, v4)
            x = x + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            v = v + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
            if (x - 1.0) * (x - 1.0) + v * v <= tol_sq:
                labels[i] = 1
                break
            if (x + 1.0) * (x + 1.0) + v * v <= tol_sq:
                labels[i] = -1
                break
    return labels
