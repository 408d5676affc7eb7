"""Observable dictionaries: families of scalar functions evaluated row-wise.

Each dictionary maps a state vector of length N to a row of K observable
values. Construction records are kept as plain JSON-ready dicts (the
descriptor) so that any dictionary can be serialized with an experiment
archive and rebuilt later via `from_descriptor`.

Families: tensor-product Hermite polynomials, thin-plate radial basis
functions, per-box Legendre spectral elements on an adaptive box tree,
raw state coordinates, and complex Fourier exponentials on the 2-torus.
"""

import numpy as np
from numpy.polynomial.hermite import hermvander
from numpy.polynomial.legendre import legvander

from . import kernels
from .numerics import truncated_pinv


class Dictionary:
    """Base evaluator. Subclasses fill in `_rows` for 2-d input blocks.

    Calling with a single state vector (length `dim`) returns one row of
    length `size`; calling with an (M, dim) block returns (M, size).
    Real-valued families return float64 rows, the Fourier family complex128.
    """

    def __init__(self, size, dim, descriptor):
        self.size = size
        self.dim = dim
        self.descriptor = descriptor

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        single = points.ndim == 1
        if single:
            points = points[None, :]
        if points.ndim != 2 or points.shape[1] != self.dim:
            raise ValueError(
                f"expected points of dimension {self.dim}, got shape {points.shape}"
            )
        rows = self._rows(points)
        return rows[0] if single else rows

    def _rows(self, points):
        raise NotImplementedError


def _digit_table(n_axes, max_order, total_degree=False):
    # multi-index digits, first axis least significant
    ks = np.arange((max_order + 1) ** n_axes)
    alphas = (ks[:, None] // (max_order + 1) ** np.arange(n_axes)) % (max_order + 1)
    if total_degree:
        alphas = alphas[alphas.sum(axis=1) <= max_order]
    return alphas


class HermiteDictionary(Dictionary):
    """Tensor products of physicists' Hermite polynomials H_0..H_max_order.

    Ordering is row-major with the first coordinate's order varying fastest:
    psi_k = prod_a H_{d_a}(x_a) where (d_0, d_1, ...) are the base-(p+1)
    digits of k, d_0 least significant.
    """

    def __init__(self, dim, max_order):
        if dim < 1 or max_order < 0:
            raise ValueError("hermite_dictionary: need dim >= 1 and max_order >= 0")
        self.max_order = max_order
        self._alphas = _digit_table(dim, max_order)
        desc = {"family": "hermite", "dim": dim, "max_order": max_order}
        super().__init__(len(self._alphas), dim, desc)

    def _rows(self, points):
        rows = np.ones((points.shape[0], self.size))
        for a in range(self.dim):
            table = hermvander(points[:, a], self.max_order)
            rows *= table[:, self._alphas[:, a]]
        return rows


def hermite_dictionary(dim, max_order):
    return HermiteDictionary(dim, max_order)


class ThinPlateRbfDictionary(Dictionary):
    """r^2 log(r) bumps centered at given points, zero at each center."""

    def __init__(self, centers, include_constant=False):
        centers = np.asarray(centers, dtype=float)
        if centers.ndim == 1:
            centers = centers[:, None]
        if centers.shape[0] < 1:
            raise ValueError("thin_plate_rbf_dictionary: need at least one center")
        self.centers = centers
        self.include_constant = bool(include_constant)
        dup = np.unique(centers, axis=0).shape[0] < centers.shape[0]
        desc = {
            "family": "thin_plate_rbf",
            "include_constant": self.include_constant,
            "duplicate_centers": bool(dup),
            "centers": centers.tolist(),
        }
        size = centers.shape[0] + (1 if include_constant else 0)
        super().__init__(size, centers.shape[1], desc)

    def _rows(self, points):
        vals = kernels.thin_plate_matrix(points, self.centers)
        if self.include_constant:
            vals = np.hstack([np.ones((points.shape[0], 1)), vals])
        return vals


def thin_plate_rbf_dictionary(centers, include_constant=False):
    return ThinPlateRbfDictionary(centers, include_constant)


class StateDictionary(Dictionary):
    """Coordinate projections psi_i(x) = x_i."""

    def __init__(self, n):
        if n < 1:
            raise ValueError("state_dictionary: need n >= 1")
        super().__init__(n, n, {"family": "state", "n": n})

    def _rows(self, points):
        return points.copy()


def state_dictionary(n):
    return StateDictionary(n)


class FourierPairDictionary(Dictionary):
    """exp(i m x + i n y) on the 2-torus for an index square of wavenumbers.

    For parameter K the k-th function, k = 0..K^2, carries wavenumbers
    m = (k mod K) - K/2 and n = floor(k / K) - K/2, so the family has
    K^2 + 1 members and the last one repeats the corner (m, n) = (-K/2, K/2).
    """

    def __init__(self, k_param):
        if k_param < 2 or k_param % 2:
            raise ValueError("fourier_pair_dictionary: k_param must be even and >= 2")
        self.k_param = k_param
        ks = np.arange(k_param ** 2 + 1)
        self.m = ks % k_param - k_param // 2
        self.n = ks // k_param - k_param // 2
        desc = {"family": "fourier_pair", "k_param": k_param}
        super().__init__(ks.size, 2, desc)

    def _rows(self, points):
        phase = points[:, 0, None] * self.m + points[:, 1, None] * self.n
        return np.exp(1j * phase)


def fourier_pair_dictionary(k_param):
    return FourierPairDictionary(k_param)


class BoxTree:
    """Axis-aligned box partition from simultaneous bisection of all axes.

    Leaves are half-open boxes [lo, hi) except on faces that touch the root's
    upper boundary, which are closed. `locate` maps points to leaf ids, -1 for
    points outside every leaf (outside the root, or in a pruned empty region).
    Trees built by `build_box_tree` descend the stored node structure; trees
    rebuilt from a bare leaf list test membership directly, with the same
    boundary convention.
    """

    def __init__(self, root_lo, root_hi, leaf_lo, leaf_hi, counts, depths,
                 node_mid=None, node_children=None, root_code=None):
        self.root_lo = root_lo
        self.root_hi = root_hi
        self.leaf_lo = leaf_lo
        self.leaf_hi = leaf_hi
        self.counts = counts
        self.depths = depths
        self._node_mid = node_mid
        self._node_children = node_children
        self._root_code = root_code

    @property
    def n_leaves(self):
        return self.leaf_lo.shape[0]

    @property
    def dim(self):
        return self.leaf_lo.shape[1]

    def locate(self, points):
        points = np.asarray(points, dtype=float)
        single = points.ndim == 1
        if single:
            points = points[None, :]
        out = np.full(points.shape[0], -1, dtype=np.int64)
        inside = (points >= self.root_lo).all(axis=1) & (points <= self.root_hi).all(axis=1)
        if self._node_mid is None:
            self._locate_direct(points, inside, out)
        elif self._root_code <= -2:
            out[inside] = -self._root_code - 2
        else:
            self._locate_descend(points, inside, out)
        return int(out[0]) if single else out

    def _locate_descend(self, points, inside, out):
        shifts = np.arange(self.dim)
        active = np.flatnonzero(inside)
        node = np.full(active.size, self._root_code, dtype=np.int64)
        while active.size:
            mids = self._node_mid[node]
            codes = ((points[active] >= mids) << shifts).sum(axis=1)
            nxt = self._node_children[node, codes]
            hit = nxt <= -2
            out[active[hit]] = -nxt[hit] - 2
            keep = nxt >= 0
            active = active[keep]
            node = nxt[keep]

    def _locate_direct(self, points, inside, out):
        top = self.leaf_hi == self.root_hi
        for start in range(0, points.shape[0], 4096):
            stop = min(start + 4096, points.shape[0])
            x = points[start:stop][:, None, :]
            below = (x < self.leaf_hi) | (top & (x <= self.leaf_hi))
            member = ((x >= self.leaf_lo) & below).all(axis=2)
            hit = np.flatnonzero(member.any(axis=1) & inside[start:stop])
            out[hit + start] = member[hit].argmax(axis=1)

    def leaf_list(self):
        """Leaves as (lo, hi, count, depth) tuples, in id order."""
        return [
            (self.leaf_lo[i].copy(), self.leaf_hi[i].copy(), int(self.counts[i]), int(self.depths[i]))
            for i in range(self.n_leaves)
        ]


def build_box_tree(data, root, max_points, max_depth):
    """Recursively bisect every axis of `root` until no box holds more than
    `max_points` samples or `max_depth` is reached. Empty children are pruned.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise ValueError("build_box_tree: data must be an (M, N) matrix")
    n = data.shape[1]
    lo, hi = root
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (n,)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (n,)).copy()
    if np.any(hi <= lo):
        raise ValueError("build_box_tree: root box must have positive extent")
    if max_points < 1:
        raise ValueError("build_box_tree: max_points must be >= 1")
    outside = ((data < lo) | (data > hi)).any(axis=1)
    if outside.any():
        bad = np.flatnonzero(outside)
        raise ValueError(
            f"build_box_tree: {bad.size} data points outside root box, "
            f"first indices {bad[:10].tolist()}"
        )

    shifts = np.arange(n)
    node_mid = []
    node_children = []
    leaf_lo, leaf_hi, counts, depths = [], [], [], []

    def descend(idx, blo, bhi, depth):
        if idx.size <= max_points or depth >= max_depth:
            leaf_lo.append(blo)
            leaf_hi.append(bhi)
            counts.append(idx.size)
            depths.append(depth)
            return -len(leaf_lo) - 1
        mid = 0.5 * (blo + bhi)
        me = len(node_mid)
        node_mid.append(mid)
        node_children.append(np.full(2 ** n, -1, dtype=np.int64))
        codes = ((data[idx] >= mid) << shifts).sum(axis=1)
        for c in range(2 ** n):
            sub = idx[codes == c]
            if sub.size == 0:
                continue
            bits = (c >> shifts) & 1
            clo = np.where(bits == 1, mid, blo)
            chi = np.where(bits == 1, bhi, mid)
            node_children[me][c] = descend(sub, clo, chi, depth + 1)
        return me

    root_code = descend(np.arange(data.shape[0]), lo, hi, 0)
    return BoxTree(
        root_lo=lo,
        root_hi=hi,
        leaf_lo=np.array(leaf_lo),
        leaf_hi=np.array(leaf_hi),
        counts=np.array(counts, dtype=np.int64),
        depths=np.array(depths, dtype=np.int64),
        node_mid=np.array(node_mid) if node_mid else None,
        node_children=np.array(node_children) if node_children else None,
        root_code=root_code,
    )


def box_tree_from_leaves(leaf_lo, leaf_hi, root=None, counts=None, depths=None):
    """Rebuild a tree from its leaf boxes alone (descriptor round-trips,
    hand-specified partitions). Leaf ids follow the given order. The root
    defaults to the bounding hull of the leaves.
    """
    leaf_lo = np.atleast_2d(np.asarray(leaf_lo, dtype=float))
    leaf_hi = np.atleast_2d(np.asarray(leaf_hi, dtype=float))
    if leaf_lo.shape != leaf_hi.shape or leaf_lo.shape[0] < 1:
        raise ValueError("box_tree_from_leaves: malformed leaf arrays")
    if root is None:
        lo, hi = leaf_lo.min(axis=0), leaf_hi.max(axis=0)
    else:
        lo = np.asarray(root[0], dtype=float)
        hi = np.asarray(root[1], dtype=float)
    n_leaves = leaf_lo.shape[0]
    if counts is None:
        counts = np.zeros(n_leaves, dtype=np.int64)
    if depths is None:
        depths = np.zeros(n_leaves, dtype=np.int64)
    return BoxTree(
        root_lo=lo,
        root_hi=hi,
        leaf_lo=leaf_lo,
        leaf_hi=leaf_hi,
        counts=np.asarray(counts, dtype=np.int64),
        depths=np.asarray(depths, dtype=np.int64),
    )


class SpectralElementDictionary(Dictionary):
    """Per-leaf Legendre polynomials, affinely mapped so each leaf's edges
    sit at -1 and +1. Functions vanish identically outside their leaf, so
    rows for points in different leaves have disjoint support.

    With `tensor` set each leaf carries the full (order+1)^N tensor product;
    otherwise multi-indices are restricted to total degree <= order. In one
    dimension the two choices coincide.
    """

    def __init__(self, tree, order, tensor=False):
        if order < 0:
            raise ValueError("spectral_element_dictionary: order must be >= 0")
        self.tree = tree
        self.order = order
        self.tensor = bool(tensor)
        self._alphas = _digit_table(tree.dim, order, total_degree=not tensor)
        self.block = len(self._alphas)
        desc = {
            "family": "spectral_element",
            "order": order,
            "tensor": self.tensor,
            "root_lo": tree.root_lo.tolist(),
            "root_hi": tree.root_hi.tolist(),
            "leaf_lo": tree.leaf_lo.tolist(),
            "leaf_hi": tree.leaf_hi.tolist(),
            "leaf_counts": tree.counts.tolist(),
            "leaf_depths": tree.depths.tolist(),
        }
        super().__init__(tree.n_leaves * self.block, tree.dim, desc)

    def _rows(self, points):
        rows = np.zeros((points.shape[0], self.size))
        leaf = self.tree.locate(points)
        order_idx = np.argsort(leaf, kind="stable")
        sorted_leaf = leaf[order_idx]
        starts = np.searchsorted(sorted_leaf, np.arange(self.tree.n_leaves), side="left")
        ends = np.searchsorted(sorted_leaf, np.arange(self.tree.n_leaves), side="right")
        for lf in range(self.tree.n_leaves):
            sel = order_idx[starts[lf]:ends[lf]]
            if sel.size == 0:
                continue
            lo = self.tree.leaf_lo[lf]
            hi = self.tree.leaf_hi[lf]
            xi = (2.0 * points[sel] - (lo + hi)) / (hi - lo)
            vals = np.ones((sel.size, self.block))
            for a in range(self.dim):
                table = legvander(xi[:, a], self.order)
                vals *= table[:, self._alphas[:, a]]
            rows[sel, lf * self.block:(lf + 1) * self.block] = vals
        return rows


def spectral_element_dictionary(tree, order, tensor=False):
    return SpectralElementDictionary(tree, order, tensor)


def from_descriptor(desc):
    """Rebuild a dictionary from its serialized construction record."""
    family = desc.get("family")
    if family == "hermite":
        return HermiteDictionary(desc["dim"], desc["max_order"])
    if family == "thin_plate_rbf":
        return ThinPlateRbfDictionary(desc["centers"], desc["include_constant"])
    if family == "state":
        return StateDictionary(desc["n"])
    if family == "fourier_pair":
        return FourierPairDictionary(desc["k_param"])
    if family == "spectral_element":
        tree = box_tree_from_leaves(
            desc["leaf_lo"],
            desc["leaf_hi"],
            root=(desc["root_lo"], desc["root_hi"]),
            counts=desc["leaf_counts"],
            depths=desc["leaf_depths"],
        )
        return SpectralElementDictionary(tree, desc["order"], desc["tensor"])
    raise ValueError(f"unknown dictionary family: {family!r}")


class FullStateWeights:
    """Weights B with g(x) = x expressed as Psi(x) B, column per coordinate."""

    def __init__(self, b, exact, residual):
        self.b = b
        self.exact = exact
        self.residual = residual


def full_state_weights(d, data=None, rtol=1e-10):
    """Express the identity observable in the dictionary.

    When the family contains the coordinate functions outright (state
    coordinates, Hermite with max_order >= 1, spectral elements with
    order >= 1) the weights are placed symbolically and the exact flag is
    set. Any other family needs sample data for a least-squares fit; the
    root-mean-square fit residual is reported and the exact flag cleared.
    `data` may be a snapshot set (its x side is used) or a plain (M, N)
    array of sample points.
    """
    if isinstance(d, StateDictionary):
        return FullStateWeights(np.eye(d.size), True, 0.0)
    if isinstance(d, HermiteDictionary) and d.max_order >= 1:
        b = np.zeros((d.size, d.dim))
        for a in range(d.dim):
            b[(d.max_order + 1) ** a, a] = 0.5
        return FullStateWeights(b, True, 0.0)
    if isinstance(d, SpectralElementDictionary) and d.order >= 1:
        b = np.zeros((d.size, d.dim))
        alist = d._alphas.tolist()
        zero_pos = alist.index([0] * d.dim)
        tree = d.tree
        for lf in range(tree.n_leaves):
            center = 0.5 * (tree.leaf_lo[lf] + tree.leaf_hi[lf])
            halfw = 0.5 * (tree.leaf_hi[lf] - tree.leaf_lo[lf])
            base = lf * d.block
            for a in range(d.dim):
                unit = [0] * d.dim
                unit[a] = 1
                b[base + zero_pos, a] = center[a]
                b[base + alist.index(unit), a] = halfw[a]
        return FullStateWeights(b, True, 0.0)

    if data is None:
        raise ValueError(
            "full_state_weights: this dictionary has no exact coordinate "
            "representation; supply data for a least-squares fit"
        )
    if hasattr(data, "x"):
        x = np.asarray(data.x, dtype=float).T
    else:
        x = np.asarray(data, dtype=float)
    m = x.shape[0]
    probe = d(x[:1])
    work_dtype = complex if np.iscomplexobj(probe) else float
    gram = np.zeros((d.size, d.size), dtype=work_dtype)
    cross = np.zeros((d.size, x.shape[1]), dtype=work_dtype)
    for start in range(0, m, 1024):
        px = d(x[start:start + 1024])
        gram += px.conj().T @ px
        cross += px.conj().T @ x[start:start + 1024]
    gram /= m
    cross /= m
    b = truncated_pinv(gram, rtol) @ cross
    sq = 0.0
    for start in range(0, m, 1024):
        diff = d(x[start:start + 1024]) @ b - x[start:start + 1024]
        sq += float((np.abs(diff) ** 2).sum())
    residual = float(np.sqrt(sq / (m * x.shape[1])))
    return FullStateWeights(b, False, residual)
