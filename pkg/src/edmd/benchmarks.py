"""Benchmark data generators and the oracles used to validate them.

Four systems: a 2-d linear map with a closed-form Koopman spectrum, the
damped Duffing oscillator with two spiral attractors, a double-well
overdamped Langevin process on [-1, 1], and a driftless diffusion on a
rectangle embedded as a swiss roll in R^3. Each generator is seeded and
bit-reproducible; randomness is drawn from counter-based streams keyed by
(seed, block index) in fixed 65536-trajectory blocks, so results do not
depend on how generation is scheduled.
"""

import numpy as np

from . import kernels
from .core import EigenpairReference, GramPair, SnapshotSet
from .dictionaries import (
    box_tree_from_leaves,
    fourier_pair_dictionary,
    spectral_element_dictionary,
)

LTI_MAP = np.array([[0.9, -0.1], [0.0, 0.8]])

EM_STEPS = 100
EM_DT = 1e-3
MACRO_DT = EM_STEPS * EM_DT

_TRAJ_BLOCK = 65536


def _stream(seed, key):
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(key,))
    return np.random.Generator(np.random.Philox(ss))


def _blocked_normal(seed, m, shape_per_traj):
    """Standard normal draws in fixed trajectory blocks: block b comes from
    stream (seed, b+1) regardless of m, so enlarging a run extends rather
    than reshuffles the noise."""
    parts = []
    for b, start in enumerate(range(0, m, _TRAJ_BLOCK)):
        count = min(_TRAJ_BLOCK, m - start)
        parts.append(_stream(seed, b + 1).standard_normal((count,) + shape_per_traj))
    return np.concatenate(parts, axis=0)


def lti_generate(m_count, seed=0):
    """Snapshot pairs of the linear map y = Jx on standard normal inputs."""
    if m_count < 1:
        raise ValueError("lti_generate: m_count must be >= 1")
    x = _stream(seed, 0).standard_normal((2, m_count))
    return SnapshotSet(x=x, y=LTI_MAP @ x)


def lti_true_eigen(i, j):
    """Closed-form eigenpair of the linear benchmark.

    mu = 0.9^i 0.8^j with eigenfunction ((x - y)/sqrt(2))^i y^j, so the
    evaluator maps (M, 2) points to M values.
    """
    if i < 0 or j < 0:
        raise ValueError("lti_true_eigen: i and j must be >= 0")
    mu = 0.9 ** i * 0.8 ** j

    def phi(points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return ((points[:, 0] - points[:, 1]) / np.sqrt(2.0)) ** i * points[:, 1] ** j

    return mu, phi


DUFFING_DT = 0.01


def duffing_generate(n_traj=1000, samples_per_traj=11, delta_t=0.25, seed=0):
    """Sampled trajectories of the damped Duffing oscillator.

    x'' = -0.5 x' - x(-1 + x^2), integrated with a classical fourth-order
    one-step method at internal step ~0.01, sampled every delta_t. Each
    trajectory of `samples_per_traj` states contributes samples_per_traj - 1
    consecutive pairs; columns are ordered sample-major (all trajectories'
    first pair, then all second pairs, ...).
    """
    if n_traj < 1 or samples_per_traj < 2:
        raise ValueError("duffing_generate: need n_traj >= 1 and samples_per_traj >= 2")
    substeps = max(1, int(round(delta_t / DUFFING_DT)))
    h = delta_t / substeps
    states = _stream(seed, 0).uniform(-2.0, 2.0, size=(n_traj, 2))
    samples = [states]
    for _ in range(samples_per_traj - 1):
        states = kernels.duffing_rk4(states, h, substeps)
        samples.append(states)
    x = np.concatenate(samples[:-1], axis=0).T
    y = np.concatenate(samples[1:], axis=0).T
    return SnapshotSet(x=x, y=y, delta_t=delta_t)


def duffing_basin_labels(points, t_max=200.0, tol=1e-3):
    """Basin labels by direct integration: +1 for the spiral at (1, 0),
    -1 for (-1, 0), 0 when neither is approached within t_max."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    return kernels.duffing_basin(points, DUFFING_DT, t_max, tol)


def duffing_basin_oracle(x0):
    """Label of a single initial condition: 'right', 'left' or 'unresolved'."""
    label = int(duffing_basin_labels(np.asarray(x0, dtype=float)[None, :])[0])
    return {1: "right", -1: "left", 0: "unresolved"}[label]


class BasinClassification:
    """Two-way split of eigenfunction values about their mean real part."""

    def __init__(self, labels, threshold, degenerate):
        self.labels = labels
        self.threshold = threshold
        self.degenerate = degenerate


def classify_basins(phi1):
    """Threshold the real parts of an eigenfunction at their mean.

    Points at or above the mean get +1, the rest -1. When every point lands
    on one side (constant input) the split is degenerate.
    """
    vals = np.asarray(phi1).ravel()
    if not np.all(np.isfinite(vals)):
        raise ValueError("classify_basins: values must be finite")
    re = vals.real.astype(float)
    threshold = float(re.mean())
    labels = np.where(re >= threshold, 1, -1).astype(np.int8)
    degenerate = bool((labels == labels[0]).all())
    return BasinClassification(labels=labels, threshold=threshold, degenerate=degenerate)


def double_well_potential(x):
    x = np.asarray(x, dtype=float)
    return -2.0 * x ** 2 * (x ** 2 - 1.0) ** 2


def double_well_drift(x):
    """-U'(x) for U(x) = -2 x^2 (x^2 - 1)^2."""
    x = np.asarray(x, dtype=float)
    return 4.0 * x * (x * x - 1.0) * (3.0 * x * x - 1.0)


def double_well_generate(sigma, m_count, seed=0):
    """One macro-step of the double-well Langevin process for M walkers.

    Initial positions uniform on [-1, 1]; 100 stochastic-Euler substeps of
    dt = 1e-3 under drift -U', diffusion sigma, reflecting at both ends.
    """
    if sigma < 0:
        raise ValueError("double_well_generate: sigma must be >= 0")
    if m_count < 1:
        raise ValueError("double_well_generate: m_count must be >= 1")
    x0 = _stream(seed, 0).uniform(-1.0, 1.0, size=m_count)
    noise = _blocked_normal(seed, m_count, (EM_STEPS,))
    noise *= sigma * np.sqrt(EM_DT)
    y = kernels.double_well_em(x0, noise, EM_DT)
    return SnapshotSet(x=x0[None, :], y=y[None, :], delta_t=MACRO_DT)


def double_well_dictionary(order=9):
    """Four equal spectral-element boxes on [-1, 1] with per-box Legendre
    polynomials of degree 0..order (40 functions at the default order)."""
    edges = np.array([-1.0, -0.5, 0.0, 0.5, 1.0])
    tree = box_tree_from_leaves(edges[:-1, None], edges[1:, None], root=([-1.0], [1.0]))
    return spectral_element_dictionary(tree, order)


class FdOperator:
    """Finite-difference discretization of phi -> drift phi' + (sigma^2/2) phi''
    on a cell-centered uniform grid with reflecting (zero-derivative) ends."""

    def __init__(self, grid, sigma, matrix):
        self.grid = grid
        self.sigma = sigma
        self.matrix = matrix


def backward_operator_1d(drift, sigma, n, lo=-1.0, hi=1.0):
    """Second-order central-difference operator with ghost-point closures.

    The two closure corrections add the outward neighbor's coefficient back
    onto the diagonal, which keeps every row sum exactly zero, so constants
    are annihilated in exact arithmetic.
    """
    if n < 3:
        raise ValueError("backward_operator_1d: need n >= 3")
    h = (hi - lo) / n
    grid = lo + (np.arange(n) + 0.5) * h
    b = np.asarray(drift(grid), dtype=float)
    diff = sigma ** 2 / (2.0 * h * h)
    adv = b / (2.0 * h)
    t = np.zeros((n, n))
    idx = np.arange(n)
    t[idx, idx] = -2.0 * diff
    t[idx[:-1], idx[:-1] + 1] = diff + adv[:-1]
    t[idx[1:], idx[1:] - 1] = diff - adv[1:]
    t[0, 0] += diff - adv[0]
    t[n - 1, n - 1] += diff + adv[n - 1]
    return FdOperator(grid=grid, sigma=sigma, matrix=t)


def double_well_fd_oracle(sigma, n=1024):
    """Reference spectrum of the double-well generator on a fine grid.

    Returns eigenvalues sorted descending (the leading one is 0 with a
    constant eigenvector) and real unit-norm eigenvector columns with the
    sign fixed by their largest-modulus entry.
    """
    op = backward_operator_1d(double_well_drift, sigma, n)
    values, vectors = np.linalg.eig(op.matrix)
    order = np.argsort(-values.real)
    values = values.real[order]
    vectors = vectors[:, order]
    cleaned = np.empty((n, n))
    for j in range(n):
        col = vectors[:, j]
        top = np.abs(col).argmax()
        phase = col[top] / np.abs(col[top])
        col = (col / phase).real
        cleaned[:, j] = col / np.linalg.norm(col)
    return values, cleaned


def double_well_reference(sigma, n=1024):
    """First nontrivial FD eigenpair packaged for the convergence study.

    The eigenfunction evaluator interpolates the grid eigenvector linearly,
    extending by its end values outside the grid (consistent with the
    reflecting closure).
    """
    values, vectors = double_well_fd_oracle(sigma, n)
    op_grid = -1.0 + (np.arange(n) + 0.5) * (2.0 / n)
    vec = vectors[:, 1]

    def phi(points):
        pts = np.asarray(points, dtype=float).ravel()
        return np.interp(pts, op_grid, vec)

    return EigenpairReference(
        value=complex(values[1]),
        eigenfunction=phi,
        points=op_grid[:, None],
        continuous=True,
    )


SWISS_DOMAIN = np.array([[0.0, 3.0 * np.pi], [0.0, 2.0 * np.pi]])


def swiss_roll_map(s):
    """Embed intrinsic coordinates (s1, s2) as ((s1+0.1)cos s1, s2, (s1+0.1)sin s1)."""
    s = np.atleast_2d(np.asarray(s, dtype=float))
    r = s[:, 0] + 0.1
    return np.column_stack((r * np.cos(s[:, 0]), s[:, 1], r * np.sin(s[:, 0])))


def swiss_intrinsic_from_3d(points):
    """Invert the embedding: s1 = hypot(x, z) - 0.1, s2 = y.

    The radius s1 + 0.1 is strictly increasing in s1, so the roll never
    self-intersects and the inverse is well defined on the whole domain.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    s1 = np.hypot(points[:, 0], points[:, 2]) - 0.1
    return np.column_stack((s1, points[:, 1]))


def swiss_roll_generate(epsilon, m_count, seed=0):
    """Driftless reflecting diffusion on a rectangle, returned both in the
    embedded 3-d coordinates and in the intrinsic 2-d ones.

    Amplitudes are (2, 2) when epsilon is None and (2/epsilon, 2) otherwise
    (fast mixing along the rolled direction).
    """
    if m_count < 1:
        raise ValueError("swiss_roll_generate: m_count must be >= 1")
    if epsilon is not None and not epsilon > 0:
        raise ValueError("swiss_roll_generate: epsilon must be positive or None")
    amps = np.array([2.0, 2.0]) if epsilon is None else np.array([2.0 / epsilon, 2.0])
    s0 = _stream(seed, 0).uniform(
        SWISS_DOMAIN[:, 0], SWISS_DOMAIN[:, 1], size=(m_count, 2)
    )
    noise = _blocked_normal(seed, m_count, (EM_STEPS, 2))
    noise *= amps * np.sqrt(EM_DT)
    s1 = kernels.rect_em(s0, noise, SWISS_DOMAIN)
    s_true = SnapshotSet(x=s0.T, y=s1.T, delta_t=MACRO_DT)
    s3d = SnapshotSet(x=swiss_roll_map(s0).T, y=swiss_roll_map(s1).T, delta_t=MACRO_DT)
    return s3d, s_true


def swiss_true_eigenvalue(i, j):
    """lambda_ij = -2 (i^2/9 + j^2/4) for the reflecting rectangle diffusion."""
    if i < 0 or j < 0:
        raise ValueError("swiss_true_eigenvalue: i and j must be >= 0")
    return -2.0 * (i * i / 9.0 + j * j / 4.0)


def swiss_true_eigenfunction(i, j):
    """Evaluator cos(i s1 / 3) cos(j s2 / 2) on intrinsic (M, 2) points."""

    def phi(points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.cos(i * points[:, 0] / 3.0) * np.cos(j * points[:, 1] / 2.0)

    return phi


def appendix_matrices(k_param=8):
    """Closed-form Gram pair for the Fourier dictionary on the torus.

    G_ij = 2 pi and A_ij = -2 pi (m_j + n_j)^2 whenever the two index pairs
    share m + n, both zero otherwise. m_count is 0: the pair is analytic,
    not accumulated from samples.
    """
    d = fourier_pair_dictionary(k_param)
    s = d.m + d.n
    same = s[:, None] == s[None, :]
    g = np.where(same, 2.0 * np.pi, 0.0)
    a = np.where(same, -2.0 * np.pi * (s[None, :] ** 2).astype(float), 0.0)
    return GramPair(g=g, a=a, m_count=0)
