"""kNN and kernel density estimators on the sphere, used as comparison baselines."""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .sphere import as_unit, cap_volume
from .vmf import log_normalizer

KERNELS = ("vmf", "ambient-gaussian")

_BLOCK = 512


@dataclass(frozen=True, eq=False)
class KnnModel:
    data: np.ndarray
    k_nn: int

    def __post_init__(self):
        data = np.ascontiguousarray(np.atleast_2d(as_unit(self.data)))
        n = data.shape[0]
        if int(self.k_nn) != self.k_nn or not 1 <= self.k_nn <= n:
            raise ValueError(f"k_nn must be an integer in [1, {n}], got {self.k_nn!r}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "k_nn", int(self.k_nn))

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def d(self):
        return self.data.shape[1]

    def __call__(self, xs):
        return knn_density(self, xs)


@dataclass(frozen=True, eq=False)
class KdeModel:
    data: np.ndarray
    bandwidth: float
    kernel: str = "vmf"

    def __post_init__(self):
        data = np.ascontiguousarray(np.atleast_2d(as_unit(self.data)))
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if self.kernel not in KERNELS:
            raise ValueError(f"kernel must be one of {KERNELS}, got {self.kernel!r}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "bandwidth", float(self.bandwidth))

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def d(self):
        return self.data.shape[1]

    def __call__(self, xs):
        return kde_density(self, xs)


def kth_distances(data, queries, ks, exclude_self=False):
    """Chordal distance from each query to its k-th nearest data point, for each k.

    Returns an array of shape ``(len(ks), n_queries)``.  With
    ``exclude_self`` the queries must be the data itself and a point is not
    counted as its own neighbour.
    """
    data = np.ascontiguousarray(data, dtype=np.float64)
    queries = np.ascontiguousarray(queries, dtype=np.float64)
    ks = [int(k) for k in ks]
    out = np.empty((len(ks), queries.shape[0]))
    kth = sorted({k - 1 for k in ks})
    for start in range(0, queries.shape[0], _BLOCK):
        stop = min(start + _BLOCK, queries.shape[0])
        dist = _kernels.chordal_block(queries[start:stop], data)
        if exclude_self:
            rows = np.arange(stop - start)
            dist[rows, start + rows] = np.inf
        part = np.partition(dist, kth, axis=1)
        for t, k in enumerate(ks):
            out[t, start:stop] = part[:, k - 1]
    return out


def _knn_from_radius(k, n, d, r):
    r = np.minimum(r, 2.0)
    with np.errstate(divide="ignore"):
        # coincident points give radius 0: reported as +inf density
        return np.where(r > 0, k / (n * cap_volume(d, r)), np.inf)


def knn_density(model, xs):
    """``k / (n * vol(B(x, r_k(x))))`` with the exact spherical cap volume."""
    pts = as_unit(xs, model.d)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    r = kth_distances(model.data, pts, [model.k_nn])[0]
    out = _knn_from_radius(model.k_nn, model.n, model.d, r)
    return float(out[0]) if single else out


def knn_density_grid(data, xs, ks):
    """kNN estimates for several ``k`` at once, shape ``(len(ks), n_queries)``."""
    data = np.atleast_2d(as_unit(data))
    pts = np.atleast_2d(as_unit(xs, data.shape[1]))
    radii = kth_distances(data, pts, ks)
    n, d = data.shape
    return np.stack([_knn_from_radius(int(k), n, d, radii[t]) for t, k in enumerate(ks)])


def _kernel_values(dots, bandwidth, kernel, d):
    if kernel == "vmf":
        kappa = 1.0 / (bandwidth * bandwidth)
        log_peak = log_normalizer(d, kappa) + kappa
        return np.exp(log_peak + kappa * (dots - 1.0))
    sq = np.maximum(2.0 - 2.0 * dots, 0.0)
    norm = (2.0 * math.pi * bandwidth * bandwidth) ** (-d / 2.0)
    return norm * np.exp(-sq / (2.0 * bandwidth * bandwidth))


def kde_density_grid(data, xs, bandwidths, kernel="vmf"):
    """KDE estimates for several bandwidths, shape ``(len(bandwidths), n_queries)``.

    ``vmf`` averages vMF densities with ``kappa = 1/h^2`` centred at the data
    (a surface density); ``ambient-gaussian`` averages the isotropic Gaussian
    of R^d, which is a density with respect to volume in R^d instead.
    """
    if kernel not in KERNELS:
        raise ValueError(f"kernel must be one of {KERNELS}, got {kernel!r}")
    data = np.atleast_2d(as_unit(data))
    pts = np.atleast_2d(as_unit(xs, data.shape[1]))
    d = data.shape[1]
    out = np.empty((len(bandwidths), pts.shape[0]))
    for start in range(0, pts.shape[0], _BLOCK):
        stop = start + _BLOCK
        dots = np.clip(pts[start:stop] @ data.T, -1.0, 1.0)
        for t, h in enumerate(bandwidths):
            out[t, start:stop] = _kernel_values(dots, float(h), kernel, d).mean(axis=1)
    return out


def kde_density(model, xs):
    pts = as_unit(xs, model.d)
    single = pts.ndim == 1
    out = kde_density_grid(model.data, np.atleast_2d(pts), [model.bandwidth], model.kernel)[0]
    return float(out[0]) if single else out
