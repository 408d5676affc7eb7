"""Extended dynamic mode decomposition from snapshot pairs.

The pipeline is accumulate_gram -> koopman_matrix -> decompose. Gram
accumulation is chunked and may run on several threads; the pairwise
reduction over fixed 1024-snapshot chunks makes the sums bit-reproducible
for any worker count. Decomposition yields discrete eigenvalues mu, their
continuous counterparts lambda = log(mu)/delta_t when a time step is known,
right/left eigenvectors defining eigenfunctions and modes, and per-pair
defectiveness flags.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .numerics import DEFAULT_RTOL, eig_two_sided, fit_loglog_slope, truncated_pinv

CHUNK = 1024


class DegenerateDictionaryError(ValueError):
    """The dictionary evaluates to a numerically zero Gram matrix on the data."""


@dataclass
class SnapshotSet:
    """Paired snapshots: column m of y is the successor of column m of x."""

    x: np.ndarray
    y: np.ndarray
    delta_t: float = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.ndim != 2 or self.x.shape != self.y.shape or self.x.shape[1] < 1:
            raise ValueError(
                f"SnapshotSet: x and y must be matching N x M matrices with M >= 1, "
                f"got {self.x.shape} and {self.y.shape}"
            )
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise ValueError("SnapshotSet: snapshots contain non-finite entries")
        if self.delta_t is not None and not self.delta_t > 0:
            raise ValueError(f"SnapshotSet: delta_t must be positive, got {self.delta_t}")

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def m(self):
        return self.x.shape[1]


@dataclass
class GramPair:
    g: np.ndarray
    a: np.ndarray
    m_count: int


def _worker_count():
    raw = os.environ.get("EDMD_WORKERS", "").strip()
    if not raw:
        return 1
    workers = int(raw)
    if workers < 1:
        raise ValueError(f"EDMD_WORKERS must be >= 1, got {raw}")
    return workers


def _pairwise_sum(blocks):
    while len(blocks) > 1:
        merged = []
        for i in range(0, len(blocks) - 1, 2):
            merged.append(blocks[i] + blocks[i + 1])
        if len(blocks) % 2:
            merged.append(blocks[-1])
        blocks = merged
    return blocks[0]


def accumulate_gram(s, d):
    """G = (1/M) sum Psi(x_m)* Psi(x_m) and A = (1/M) sum Psi(x_m)* Psi(y_m).

    Snapshots are consumed in fixed chunks of 1024 columns; per-chunk partial
    sums are combined by pairwise reduction in chunk order, so the result is
    identical for any EDMD_WORKERS setting.
    """
    xs = s.x.T
    ys = s.y.T
    m = s.m

    def chunk_sums(start):
        stop = min(start + CHUNK, m)
        px = np.asarray(d(xs[start:stop]))
        py = np.asarray(d(ys[start:stop]))
        for name, block in (("x", px), ("y", py)):
            bad = ~np.isfinite(block).all(axis=1)
            if bad.any():
                idx = start + int(np.flatnonzero(bad)[0])
                raise ValueError(
                    f"accumulate_gram: dictionary produced non-finite values "
                    f"on the {name} side at snapshot {idx}"
                )
        return px.conj().T @ px, px.conj().T @ py

    starts = range(0, m, CHUNK)
    workers = _worker_count()
    if workers == 1 or len(starts) == 1:
        parts = [chunk_sums(start) for start in starts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(chunk_sums, starts))
    g = _pairwise_sum([p[0] for p in parts]) / m
    a = _pairwise_sum([p[1] for p in parts]) / m
    return GramPair(g=g, a=a, m_count=m)


def koopman_matrix(gp, rtol=DEFAULT_RTOL):
    """K = pinv(G) A with relative singular value truncation at rtol."""
    if not np.any(gp.g):
        raise DegenerateDictionaryError(
            "koopman_matrix: Gram matrix is numerically zero; the dictionary "
            "is degenerate on this data"
        )
    return truncated_pinv(gp.g, rtol) @ gp.a


@dataclass
class KoopmanDecomposition:
    """Sorted eigen-tuples of the finite-dimensional Koopman approximation.

    mu holds discrete-time eigenvalues, |mu| nonincreasing with ties broken
    by ascending principal argument. Column j of xi defines the eigenfunction
    phi_j = Psi xi_j; column j of w is the matched left eigenvector scaled so
    w_j* xi_j = 1. modes (N x K, when full-state weights were supplied) holds
    the state-space mode for each eigenvalue; columns flagged defective are
    NaN since no reliable left vector exists for them. lam holds
    log(mu)/delta_t on the principal branch when delta_t is known, with
    mu = 0 mapped to real part -inf.
    """

    mu: np.ndarray
    xi: np.ndarray
    w: np.ndarray
    defective: np.ndarray
    lam: np.ndarray = None
    modes: np.ndarray = None
    delta_t: float = None
    rtol: float = DEFAULT_RTOL
    descriptor: dict = None
    n_count: int = None
    k_count: int = None
    m_count: int = None


def _sort_order(mu):
    return np.lexsort((np.angle(mu), -np.abs(mu)))


def decompose(k, b=None, delta_t=None, rtol=DEFAULT_RTOL, descriptor=None, m_count=None):
    """Eigen-decompose the Koopman matrix into sorted spectral tuples.

    `b` carries full-state weights; when present, modes are computed as
    (W* B)^T so that column j reconstructs the state contribution of
    eigenvalue j. `delta_t` enables continuous-time eigenvalues.
    """
    k = np.asarray(k)
    two = eig_two_sided(k)
    order = _sort_order(two.values)
    mu = two.values[order].astype(complex)
    xi = two.right[:, order]
    w = two.left[:, order]
    defective = two.defective[order]

    lam = None
    if delta_t is not None:
        if not delta_t > 0:
            raise ValueError(f"decompose: delta_t must be positive, got {delta_t}")
        lam = np.empty(mu.shape, dtype=complex)
        zero = mu == 0
        with np.errstate(divide="ignore", invalid="ignore"):
            lam[~zero] = np.log(mu[~zero].astype(complex)) / delta_t
        lam[zero] = complex(-np.inf, 0.0)

    modes = None
    n_count = None
    if b is not None:
        weights = np.asarray(b.b)
        modes = (w.conj().T @ weights).T
        if defective.any():
            modes[:, defective] = np.nan
        n_count = weights.shape[1]

    return KoopmanDecomposition(
        mu=mu,
        xi=xi,
        w=w,
        defective=defective,
        lam=lam,
        modes=modes,
        delta_t=delta_t,
        rtol=rtol,
        descriptor=descriptor,
        n_count=n_count,
        k_count=k.shape[0],
        m_count=m_count,
    )


def evaluate_eigenfunctions(dec, d, points, indices=None, normalize=False):
    """phi_j(point_p) = Psi(point_p) xi_j for the requested eigenvalue indices.

    With `normalize` each column is scaled to sup-norm 1 over the supplied
    points and rotated so its largest-modulus entry is positive real.
    """
    if indices is None:
        indices = np.arange(dec.mu.size)
    indices = np.atleast_1d(np.asarray(indices, dtype=int))
    points = np.atleast_2d(np.asarray(points, dtype=float))
    vals = d(points) @ dec.xi[:, indices]
    if normalize:
        vals = vals.astype(complex)
        for j in range(vals.shape[1]):
            col = vals[:, j]
            top = np.abs(col).argmax()
            c = col[top]
            if np.abs(c) > 0:
                vals[:, j] = col * (c.conj() / np.abs(c) ** 2)
    return vals


def residual(s, d, k, a):
    """Least-squares objective J = 1/2 sum_m |(Psi(y_m) - Psi(x_m) K) a|^2."""
    a = np.asarray(a)
    if a.shape != (k.shape[0],):
        raise ValueError(f"residual: coefficient vector must have length {k.shape[0]}")
    xs = s.x.T
    ys = s.y.T
    ka = np.asarray(k) @ a
    total = 0.0
    for start in range(0, s.m, CHUNK):
        stop = min(start + CHUNK, s.m)
        r = d(ys[start:stop]) @ a - d(xs[start:stop]) @ ka
        total += float((np.abs(r) ** 2).sum())
    return 0.5 * total


def predict(dec, d, x0, n):
    """n-step prediction sum_k mu_k^n v_k phi_k(x0).

    Requires modes. Defective tuples carry no usable mode and are left out
    of the sum.
    """
    if dec.modes is None:
        raise ValueError("predict: decomposition has no modes; pass full-state "
                         "weights to decompose")
    if n < 0:
        raise ValueError(f"predict: n must be >= 0, got {n}")
    phi = d(np.asarray(x0, dtype=float)) @ dec.xi
    keep = ~dec.defective
    return dec.modes[:, keep] @ (dec.mu[keep] ** n * phi[keep])


def dmd(s, rtol=DEFAULT_RTOL):
    """Eigenvalues and eigenvectors of Y X+, sorted like decompose output."""
    if not np.any(s.x):
        raise DegenerateDictionaryError("dmd: X is numerically zero")
    op = s.y @ truncated_pinv(s.x, rtol)
    values, vectors = np.linalg.eig(op)
    order = _sort_order(values)
    return values[order], vectors[:, order]


@dataclass
class EigenpairReference:
    """Oracle eigenpair: target eigenvalue plus a callable eigenfunction
    evaluated on `points` for error measurement. `continuous` selects whether
    the value is compared against lambda or against mu.
    """

    value: complex
    eigenfunction: object
    points: np.ndarray
    continuous: bool = True


@dataclass
class ConvergenceResult:
    m_values: np.ndarray
    eigenvalue_errors: np.ndarray
    eigenfunction_errors: np.ndarray
    slope: float
    floor_limited: bool


def _leading_nontrivial(dec):
    trivial = int(np.abs(dec.mu - 1.0).argmin())
    for j in range(dec.mu.size):
        if j != trivial:
            return j
    raise ValueError("convergence_study: decomposition has a single eigenvalue")


def convergence_study(generator, d, m_values, reference, rtol=DEFAULT_RTOL):
    """Sample-size sweep of the leading nontrivial eigenpair against an oracle.

    For each M the study runs the full pipeline on generator(M), locates the
    slowest nontrivial eigenvalue (the one nearest 1 is taken as trivial),
    and records |value - reference| together with the L2 error of the unit-
    normalized, phase-aligned eigenfunction on the reference points. The
    returned slope is the log-log rate of eigenfunction error against M;
    when every error sits at the numerical floor the slope is meaningless
    and the result is flagged.
    """
    m_values = np.asarray(m_values, dtype=int)
    if m_values.size < 3 or np.any(np.diff(m_values) <= 0):
        raise ValueError("convergence_study: m_values must be increasing, length >= 3")
    ref_vals = np.asarray(reference.eigenfunction(reference.points), dtype=complex).ravel()
    ref_unit = ref_vals / np.linalg.norm(ref_vals)

    val_errors = np.empty(m_values.size)
    fun_errors = np.empty(m_values.size)
    for i, m in enumerate(m_values):
        s = generator(int(m))
        gp = accumulate_gram(s, d)
        dec = decompose(koopman_matrix(gp, rtol), delta_t=s.delta_t, rtol=rtol)
        j = _leading_nontrivial(dec)
        got = dec.lam[j] if reference.continuous else dec.mu[j]
        val_errors[i] = abs(got - reference.value)
        phi = evaluate_eigenfunctions(dec, d, reference.points, [j])[:, 0]
        norm = np.linalg.norm(phi)
        if norm == 0:
            fun_errors[i] = np.sqrt(2.0)
            continue
        phi = phi / norm
        c = np.vdot(phi, ref_unit)
        if np.abs(c) > 0:
            phi = phi * (c / np.abs(c))
        fun_errors[i] = np.linalg.norm(phi - ref_unit)

    floor = bool(np.all(fun_errors <= 1e-10))
    tiny = np.finfo(float).tiny
    slope = fit_loglog_slope(m_values.astype(float), np.maximum(fun_errors, tiny))
    return ConvergenceResult(
        m_values=m_values,
        eigenvalue_errors=val_errors,
        eigenfunction_errors=fun_errors,
        slope=slope,
        floor_limited=floor,
    )
