"""Pure-numpy implementations of the hot numeric kernels.

This backend is selected when numba is unavailable or when EDMD_NO_NUMBA is
set. Every function mirrors its numba twin operation for operation, in the
same per-element order, so the two backends produce identical results on
identical inputs.
"""

import numpy as np

_ASSIGN_BLOCK = 4096


def thin_plate_matrix(points, centers):
    """Thin-plate values r^2 log(r) between rows of `points` and `centers`.

    Computed as 0.5 * r^2 * log(r^2) to avoid the square root; defined as 0
    at r = 0.
    """
    diff = points[:, None, :] - centers[None, :, :]
    sq = (diff * diff).sum(axis=-1)
    out = np.zeros(sq.shape)
    mask = sq > 0.0
    out[mask] = 0.5 * sq[mask] * np.log(sq[mask])
    return out


def kmeans_assign(points, centers):
    """Nearest-center labels and squared distances for each point."""
    m = points.shape[0]
    labels = np.empty(m, dtype=np.int64)
    best = np.empty(m)
    for start in range(0, m, _ASSIGN_BLOCK):
        stop = min(start + _ASSIGN_BLOCK, m)
        diff = points[start:stop, None, :] - centers[None, :, :]
        sq = (diff * diff).sum(axis=-1)
        labels[start:stop] = np.argmin(sq, axis=1)
        best[start:stop] = sq[np.arange(stop - start), labels[start:stop]]
    return labels, best


def double_well_em(x0, noise, dt):
    """Euler steps of dx = -U'(x) dt + noise, reflected into [-1, 1].

    `noise` has shape (n_traj, n_steps) and is already scaled by
    sigma * sqrt(dt). Reflection folds x about the violated bound until the
    position is interior.
    """
    x = x0.copy()
    n_steps = noise.shape[1]
    for k in range(n_steps):
        f = 4.0 * x * (x * x - 1.0) * (3.0 * x * x - 1.0)
        x = x + f * dt + noise[:, k]
        while True:
            over = x > 1.0
            under = x < -1.0
            if not (over.any() or under.any()):
                break
            x[over] = 2.0 - x[over]
            x[under] = -2.0 - x[under]
    return x


def rect_em(p0, noise, bounds):
    """Driftless Euler steps reflected into an axis-aligned box.

    `noise` has shape (n_traj, n_steps, dim), pre-scaled per coordinate;
    `bounds` has shape (dim, 2).
    """
    p = p0.copy()
    n_steps = noise.shape[1]
    dim = p.shape[1]
    for k in range(n_steps):
        p = p + noise[:, k, :]
        for a in range(dim):
            lo, hi = bounds[a, 0], bounds[a, 1]
            x = p[:, a]
            while True:
                over = x > hi
                under = x < lo
                if not (over.any() or under.any()):
                    break
                x[over] = 2.0 * hi - x[over]
                x[under] = 2.0 * lo - x[under]
            p[:, a] = x
    return p


def _duffing_rhs(x, v):
    return v, -0.5 * v - x * (-1.0 + x * x)


def duffing_rk4(states, dt, n_steps):
    """Advance rows of (position, velocity) by classical fourth-order steps."""
    x = states[:, 0].copy()
    v = states[:, 1].copy()
    for _ in range(n_steps):
        k1x, k1v = _duffing_rhs(x, v)
        k2x, k2v = _duffing_rhs(x + 0.5 * dt * k1x, v + 0.5 * dt * k1v)
        k3x, k3v = _duffing_rhs(x + 0.5 * dt * k2x, v + 0.5 * dt * k2v)
        k4x, k4v = _duffing_rhs(x + dt * k3x, v + dt * k3v)
        x = x + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        v = v + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return np.column_stack((x, v))


def duffing_basin(points, dt, t_max, tol):
    """Integrate each point until it lands within `tol` of (+-1, 0).

    Returns int8 labels: +1 for the right spiral, -1 for the left one, 0 when
    neither is reached within t_max time units.
    """
    m = points.shape[0]
    labels = np.zeros(m, dtype=np.int8)
    active = np.arange(m)
    x = points[:, 0].copy()
    v = points[:, 1].copy()
    tol_sq = tol * tol
    n_steps = int(round(t_max / dt))
    for _ in range(n_steps):
        if active.size == 0:
            break
        xa, va = x[active], v[active]
        k1x, k1v = _duffing_rhs(xa, va)
        k2x, k2v = _duffing_rhs(xa + 0.5 * dt * k1x, va + 0.5 * dt * k1v)
        k3x, k3v = _duffing_rhs(xa + 0.5 * dt * k2x, va + 0.5 * dt * k2v)
        k4x, k4v = _duffing_rhs(xa + dt * k3x, va + dt * k3v)
        xa = xa + (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        va = va + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        x[active], v[active] = xa, va
        right = (xa - 1.0) * (xa - 1.0) + va * va <= tol_sq
        left = (xa + 1.0) * (xa + 1.0) + va * va <= tol_sq
        done = right | left
        if done.any():
            hit = active[done]
            labels[hit] = np.where(right[done], 1, -1).astype(np.int8)
            active = active[~done]
    return labels
