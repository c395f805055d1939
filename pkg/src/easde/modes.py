"""Mode estimation from an EaS density estimate.

``single_mode`` returns the sample point with the largest estimate.
``recover_modes`` walks down the distinct estimate levels ``lam``; at each
level it looks at the connected components of the density graph
``G(lam - eps)`` (vertices with estimate >= ``lam - eps``, edges between
points closer than ``alpha * min(r_k(x), r_k(x'))``) and, for every
component that does not yet hold a returned mode, adds the component's
highest-estimate point among those with estimate >= ``lam``.

A component counts as "already covered" when it contains the sample index of
a previously returned mode.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .baselines import kth_distances
from .eas import evaluate_batch
from .sphere import as_unit, surface_area

SQRT2 = math.sqrt(2.0)
DEFAULT_DELTA = 0.05


def argmax_first(values):
    """Index of the largest value, smallest index among ties."""
    values = np.asarray(values)
    return int(np.flatnonzero(values == values.max())[0])


def single_mode(model, data, return_index=False):
    """The training point maximizing the density estimate."""
    pts = np.atleast_2d(as_unit(data, model.d))
    if pts.shape[0] == 0:
        raise ValueError("cannot pick a mode from empty data")
    i = argmax_first(evaluate_batch(model, pts))
    return i if return_index else pts[i]


def knn_radii(data, k):
    """Distance from every point to its k-th nearest other point in ``data``."""
    pts = np.atleast_2d(as_unit(data))
    n = pts.shape[0]
    if int(k) != k or not 1 <= k <= n - 1:
        raise ValueError(f"k must be an integer in [1, {n - 1}], got {k!r}")
    return kth_distances(pts, pts, [int(k)], exclude_self=True)[0]


class UnionFind:
    """Disjoint sets over ``0..n-1`` with path halving and union by size."""

    def __init__(self, n):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x):
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        return ra


@dataclass(eq=False)
class DensityGraph:
    points: np.ndarray
    fhat: np.ndarray
    rk: np.ndarray
    alpha: float = SQRT2
    lam: float = -math.inf

    def __post_init__(self):
        self.points = np.ascontiguousarray(np.atleast_2d(as_unit(self.points)))
        self.fhat = np.asarray(self.fhat, dtype=np.float64)
        self.rk = np.asarray(self.rk, dtype=np.float64)
        n = self.points.shape[0]
        if self.fhat.shape != (n,) or self.rk.shape != (n,):
            raise ValueError("fhat and rk need one entry per point")
        if not self.alpha >= SQRT2:
            raise ValueError(f"alpha must be >= sqrt(2), got {self.alpha!r}")

    def vertices(self):
        return np.flatnonzero(self.fhat >= self.lam)

    def at_level(self, lam):
        return DensityGraph(self.points, self.fhat, self.rk, self.alpha, lam)

    def edges(self):
        """Edges ``(i, j)``, ``i < j``, among the current vertices."""
        verts = self.vertices()
        src, dst = _kernels.radius_edges(self.points[verts], self.rk[verts], float(self.alpha))
        return verts[src], verts[dst]


def connected_components(graph):
    """Components of ``G(lam)`` as sorted index arrays, ordered by smallest member."""
    verts = graph.vertices()
    if verts.size == 0:
        return []
    src, dst = graph.edges()
    uf = UnionFind(graph.points.shape[0])
    for a, b in zip(src.tolist(), dst.tolist()):
        uf.union(a, b)
    groups = {}
    for v in verts.tolist():
        groups.setdefault(uf.find(v), []).append(v)
    comps = [np.array(g, dtype=np.int64) for g in groups.values()]
    comps.sort(key=lambda c: c[0])
    return comps


def auto_eps(model, sup_density, delta=DEFAULT_DELTA):
    """Level offset ``gamma_n`` with the sup-norm of f replaced by ``sup_density``.

    gamma_n = alpha_n / (S k/m), where
    alpha_n = 2 sqrt(k S sup log(m/delta) / (m n)) + 2 log(m/delta) / (3 n).
    """
    m, k, n = model.m, model.k, model.n
    area = surface_area(model.d)
    log_term = math.log(m / delta)
    alpha_n = 2.0 * math.sqrt(k * area * sup_density * log_term / (m * n)) + 2.0 * log_term / (3.0 * n)
    return alpha_n / (area * k / m)


@dataclass
class ModeSet:
    indices: np.ndarray
    fhat: np.ndarray
    levels: np.ndarray
    eps_tilde: float = 0.0

    def __len__(self):
        return int(self.indices.shape[0])

    def points(self, data):
        return np.asarray(data)[self.indices]

    def rows(self, data):
        pts = self.points(data)
        for rank, (i, f, lam) in enumerate(zip(self.indices, self.fhat, self.levels)):
            yield [rank, int(i), *(repr(float(v)) for v in pts[rank]), repr(float(f)), repr(float(lam))]


def write_modes_csv(modes, data, path):
    d = np.asarray(data).shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode_rank", "sample_index", *(f"x{c}" for c in range(d)), "fhat", "discovery_level"])
        w.writerows(modes.rows(data))


def recover_modes(model, data, k_graph=None, alpha=SQRT2, eps_tilde="auto", delta=DEFAULT_DELTA):
    """Return every mode found by the level-set walk described in the module docstring."""
    pts = np.ascontiguousarray(np.atleast_2d(as_unit(data, model.d)))
    n = pts.shape[0]
    if n == 0:
        raise ValueError("cannot recover modes from empty data")
    if not alpha >= SQRT2:
        raise ValueError(f"alpha must be >= sqrt(2), got {alpha!r}")
    fhat = evaluate_batch(model, pts)
    if eps_tilde == "auto":
        eps = auto_eps(model, float(fhat.max()), delta)
    else:
        eps = float(eps_tilde)
        if not eps >= 0:
            raise ValueError("eps_tilde must be >= 0 or 'auto'")
    if n == 1:
        return ModeSet(np.array([0]), fhat.copy(), fhat.copy(), eps)
    if k_graph is None:
        k_graph = min(model.k, n - 1)
    rk = knn_radii(pts, k_graph)
    return level_set_modes(pts, fhat, rk, alpha, eps)


def level_set_modes(points, fhat, rk, alpha, eps):
    """The level walk itself, on precomputed estimates and k-NN radii."""
    n = points.shape[0]
    src, dst = _kernels.radius_edges(np.ascontiguousarray(points), np.asarray(rk, dtype=np.float64), float(alpha))
    # adjacency lists in CSR form
    both_src = np.concatenate([src, dst])
    both_dst = np.concatenate([dst, src])
    order_e = np.argsort(both_src, kind="stable")
    nbrs = both_dst[order_e].tolist()
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(both_src, minlength=n), out=offsets[1:])
    offsets = offsets.tolist()

    order = np.lexsort((np.arange(n), -fhat)).tolist()
    fl = fhat.tolist()
    uf = UnionFind(n)
    present = [False] * n
    covered = [False] * n  # indexed by root
    modes, mode_f, mode_lam = [], [], []
    added = 0
    pos = 0
    while pos < n:
        lam = fl[order[pos]]
        end = pos
        while end < n and fl[order[end]] == lam:
            end += 1
        floor = lam - eps
        while added < n and fl[order[added]] >= floor:
            v = order[added]
            present[v] = True
            for t in range(offsets[v], offsets[v + 1]):
                u = nbrs[t]
                if present[u]:
                    ru, rv = uf.find(u), uf.find(v)
                    if ru != rv:
                        flag = covered[ru] or covered[rv]
                        root = uf.union(ru, rv)
                        covered[root] = flag
            added += 1
        # only this level's points can head an uncovered component
        for v in sorted(order[pos:end]):
            root = uf.find(v)
            if not covered[root]:
                covered[root] = True
                modes.append(v)
                mode_f.append(fl[v])
                mode_lam.append(lam)
        pos = end
    return ModeSet(np.array(modes, dtype=np.int64), np.array(mode_f), np.array(mode_lam), eps)
