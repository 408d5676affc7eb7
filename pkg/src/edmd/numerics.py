"""Dense linear-algebra and clustering utilities used across the package.

Truncated pseudoinversion, two-sided eigendecomposition with left/right
pairing, seeded k-means, and log-log slope fitting. All functions are pure
and deterministic for fixed inputs.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import kernels

DEFAULT_RTOL = 1e-10


@dataclass
class SvdResult:
    """Singular value decomposition m = u @ diag(singular_values) @ vh."""

    u: np.ndarray
    singular_values: np.ndarray
    vh: np.ndarray


def svd(m):
    m = np.asarray(m)
    _check_matrix(m, "svd")
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    return SvdResult(u=u, singular_values=s, vh=vh)


def _check_matrix(m, where):
    if m.ndim != 2 or m.size == 0:
        raise ValueError(f"{where}: expected a nonempty 2-d matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{where}: input contains non-finite entries")


def truncated_pinv(m, rtol=DEFAULT_RTOL):
    """Moore-Penrose pseudoinverse with singular values below rtol * s_max zeroed.

    The truncation threshold is relative to the largest singular value. For a
    matrix whose singular values all fall below the threshold the result is
    the zero matrix of transposed shape.
    """
    m = np.asarray(m)
    _check_matrix(m, "truncated_pinv")
    if not (0.0 < rtol < 1.0):
        raise ValueError(f"truncated_pinv: rtol must be in (0, 1), got {rtol}")
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    if s[0] == 0.0:
        return np.zeros((m.shape[1], m.shape[0]), dtype=m.dtype)
    keep = s > rtol * s[0]
    return (vh[keep].conj().T / s[keep]) @ u[:, keep].conj().T


@dataclass
class TwoSidedEig:
    """Eigendecomposition with matched right and left eigenvectors.

    Columns of `right` are right eigenvectors; columns of `left` are left
    eigenvectors, rescaled so left[:, j].conj() @ right[:, j] = 1 whenever
    that product is not numerically zero. `defective[j]` is set when the
    left/right pairing failed for eigenvalue j (pairing distance above
    tolerance, or |w* xi| below threshold), in which case left[:, j] is kept
    at unit norm instead.
    """

    values: np.ndarray
    right: np.ndarray
    left: np.ndarray
    defective: np.ndarray = field(default=None)


def eig_two_sided(m, pair_tol=1e-8):
    """Right and left eigendecomposition of a square matrix.

    Left eigenvectors come from the eigendecomposition of the conjugate
    transpose; their eigenvalues are matched to the right ones by minimum
    total distance assignment. Eigenvalues are returned in solver order;
    sorting is the caller's concern.
    """
    m = np.asarray(m)
    _check_matrix(m, "eig_two_sided")
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"eig_two_sided: matrix must be square, got shape {m.shape}")
    values, right = np.linalg.eig(m)
    hvals, hvecs = np.linalg.eig(m.conj().T)
    left_values = hvals.conj()

    cost = np.abs(values[:, None] - left_values[None, :])
    rows, cols = linear_sum_assignment(cost)
    left = hvecs[:, cols]

    scale = max(1.0, float(np.abs(values).max()))
    defective = cost[rows, cols] > pair_tol * scale

    for j in range(values.size):
        c = left[:, j].conj() @ right[:, j]
        if abs(c) > 1e-12:
            left[:, j] = left[:, j] / c.conj()
        else:
            defective[j] = True
    return TwoSidedEig(values=values, right=right, left=left, defective=defective)


@dataclass
class KMeansResult:
    """Converged centers plus the final assignment and objective history."""

    centers: np.ndarray
    labels: np.ndarray
    inertia: float
    inertia_history: list
    degenerate: bool


def _kmeans_pp_init(points, k, rng):
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    degenerate = False
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centers[j] = points[rng.integers(n)]
            degenerate = True
            continue
        idx = rng.choice(n, p=d2 / total)
        centers[j] = points[idx]
        d2 = np.minimum(d2, ((points - centers[j]) ** 2).sum(axis=1))
    return centers, degenerate


def kmeans(points, k, seed, max_iter=300, init_centers=None):
    """Lloyd iterations from k-means++ initialization.

    Deterministic for fixed (points, k, seed). Terminates when assignments
    stop changing or after max_iter passes. An empty cluster is re-seeded at
    the point currently farthest from its assigned center. `init_centers`
    bypasses the ++ initialization (used by tests to drive edge cases).
    """
    points = np.asarray(points, dtype=float)
    _check_matrix(points, "kmeans")
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"kmeans: k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    if init_centers is None:
        centers, degenerate = _kmeans_pp_init(points, k, rng)
    else:
        centers = np.array(init_centers, dtype=float)
        if centers.shape != (k, points.shape[1]):
            raise ValueError("kmeans: init_centers shape mismatch")
        degenerate = False

    labels = None
    history = []
    for _ in range(max_iter):
        new_labels, sq = kernels.kmeans_assign(points, centers)
        history.append(float(sq.sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(centers)
        np.add.at(sums, labels, points)
        nonempty = counts > 0
        centers[nonempty] = sums[nonempty] / counts[nonempty, None]
        if not nonempty.all():
            taken = sq.copy()
            for j in np.flatnonzero(~nonempty):
                far = int(np.argmax(taken))
                centers[j] = points[far]
                taken[far] = -1.0
    labels, sq = kernels.kmeans_assign(points, centers)
    if not degenerate and k > 1 and np.unique(centers, axis=0).shape[0] < k:
        degenerate = True
    return KMeansResult(
        centers=centers,
        labels=labels,
        inertia=float(sq.sum()),
        inertia_history=history,
        degenerate=degenerate,
    )


def fit_loglog_slope(xs, ys):
    """Least-squares slope of log(y) against log(x)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("fit_loglog_slope: xs and ys must be 1-d and equal length")
    if xs.size < 3:
        raise ValueError("fit_loglog_slope: need at least 3 points")
    if np.any(xs <= 0) or np.any(ys <= 0) or not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise ValueError("fit_loglog_slope: values must be positive and finite")
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])
