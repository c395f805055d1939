"""Expand-and-sparsify coding and the density estimator built on it.

A point ``x`` on S^{d-1} is expanded to ``y = Theta x`` with ``m`` random
unit rows and sparsified by keeping the ``k`` largest coordinates.  Region
``C_j`` is the set of points whose code contains ``j``.  After counting how
many training points land in each region, the density estimate is

    f_hat(x) = m / (k^2 S_{d-1}) * sum_{j in code(x)} count_j / n

which replaces the unknown ``vol(C_j)`` by its typical value ``S_{d-1} k/m``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .sphere import as_unit, check_dimension, sample_uniform, surface_area

MODEL_FORMAT = "easde-model"
MODEL_VERSION = 1

_BLOCK = 8192


@dataclass(frozen=True, eq=False)
class ProjectionBank:
    """``m`` unit rows drawn uniformly from the sphere, stored as an (m, d) block."""

    thetas: np.ndarray
    seed: object = None

    def __post_init__(self):
        th = np.ascontiguousarray(as_unit(self.thetas), dtype=np.float64)
        if th.ndim != 2 or th.shape[0] < 1:
            raise ValueError("a projection bank needs at least one row")
        th.setflags(write=False)
        object.__setattr__(self, "thetas", th)

    @property
    def m(self):
        return self.thetas.shape[0]

    @property
    def d(self):
        return self.thetas.shape[1]


def make_bank(d, m, seed=None):
    d = check_dimension(d)
    if int(m) != m or m < 1:
        raise ValueError(f"expansion size m must be a positive integer, got {m!r}")
    return ProjectionBank(sample_uniform(d, int(m), seed), seed=seed if isinstance(seed, int) else None)


def _check_k(bank, k):
    if int(k) != k or not 1 <= k <= bank.m:
        raise ValueError(f"sparsity k must be an integer in [1, {bank.m}], got {k!r}")
    return int(k)


def _points(bank, xs):
    pts = as_unit(xs, bank.d)
    single = pts.ndim == 1
    return np.ascontiguousarray(np.atleast_2d(pts)), single


def _blocked(kernel, bank, k, xs):
    k = _check_k(bank, k)
    pts, _ = _points(bank, xs)
    out = np.empty((pts.shape[0], k), dtype=np.int64)
    for start in range(0, pts.shape[0], _BLOCK):
        stop = start + _BLOCK
        out[start:stop] = kernel(bank.thetas, pts[start:stop], k)
    return out


def ranked_codes(bank, k, xs):
    """Top-``k`` coordinates of each row of ``xs``, best first, shape (n, k).

    The first ``k' <= k`` columns are exactly the ``k'``-sparse code, so one
    call serves every smaller sparsity level.
    """
    return _blocked(_kernels.topk_ranked, bank, k, xs)


def encode(bank, k, x):
    """Sorted indices of the ``k`` largest ``theta_j . x`` (ties to smaller j).

    ``x`` may be a single vector, giving a length-``k`` array, or rows,
    giving an (n, k) array.
    """
    pts, single = _points(bank, x)
    codes = _blocked(_kernels.topk_sorted, bank, k, pts)
    return codes[0] if single else codes


def encode_batch(bank, k, xs):
    return _blocked(_kernels.topk_sorted, bank, k, xs)


@dataclass(frozen=True, eq=False)
class EasModel:
    bank: ProjectionBank
    k: int
    counts: np.ndarray
    n: int
    norm_const: float = field(init=False)

    def __post_init__(self):
        k = _check_k(self.bank, self.k)
        counts = np.array(self.counts, dtype=np.int64)
        if counts.shape != (self.bank.m,):
            raise ValueError("counts must have one entry per bank row")
        if self.n < 1:
            raise ValueError("a fitted model needs n >= 1")
        if np.any(counts < 0) or np.any(counts > self.n) or counts.sum() != self.n * k:
            raise ValueError("counts are inconsistent with n and k")
        counts.setflags(write=False)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "norm_const", self.bank.m / (k * k * surface_area(self.bank.d)))

    @property
    def d(self):
        return self.bank.d

    @property
    def m(self):
        return self.bank.m

    def merge(self, other):
        """Combine two models fitted on disjoint data with the same bank and k."""
        if other.bank is not self.bank and not np.array_equal(other.bank.thetas, self.bank.thetas):
            raise ValueError("models were fitted with different projection banks")
        if other.k != self.k:
            raise ValueError("models were fitted with different k")
        return EasModel(self.bank, self.k, self.counts + other.counts, self.n + other.n)

    def scale_from_codes(self, codes):
        sums = _kernels.code_sums(np.ascontiguousarray(codes), self.counts)
        return self.norm_const * sums / self.n

    def __call__(self, xs):
        return evaluate_batch(self, xs)


def counts_from_codes(codes, m):
    return np.bincount(np.asarray(codes).ravel(), minlength=m).astype(np.int64)


def fit(bank, k, data, chunk_size=_BLOCK):
    """Count, for every region ``C_j``, the training points whose code contains ``j``."""
    k = _check_k(bank, k)
    pts = as_unit(data, bank.d)
    pts = np.atleast_2d(pts)
    if pts.shape[0] == 0:
        raise ValueError("cannot fit on empty data")
    model = None
    for start in range(0, pts.shape[0], chunk_size):
        chunk = pts[start:start + chunk_size]
        part = EasModel(bank, k, counts_from_codes(encode_batch(bank, k, chunk), bank.m), chunk.shape[0])
        model = part if model is None else model.merge(part)
    return model


def evaluate(model, x):
    """Density estimate at a single point."""
    pts = as_unit(x, model.d)
    if pts.ndim != 1:
        raise ValueError("evaluate takes a single point; use evaluate_batch for rows")
    return float(evaluate_batch(model, pts[None, :])[0])


def evaluate_batch(model, xs):
    """Density estimates at every row of ``xs``; equal to ``evaluate`` row by row."""
    pts = np.atleast_2d(as_unit(xs, model.d))
    if pts.shape[0] == 0:
        return np.empty(0)
    return model.scale_from_codes(encode_batch(model.bank, model.k, pts))


def fit_path(bank, ks, data):
    """Models for several sparsity levels from one ranked encoding of ``data``."""
    ks = sorted({_check_k(bank, k) for k in ks})
    pts = np.atleast_2d(as_unit(data, bank.d))
    if pts.shape[0] == 0:
        raise ValueError("cannot fit on empty data")
    codes = ranked_codes(bank, ks[-1], pts)
    models = {}
    counts = np.zeros(bank.m, dtype=np.int64)
    done = 0
    for k in ks:
        counts = counts + counts_from_codes(codes[:, done:k], bank.m)
        done = k
        models[k] = EasModel(bank, k, counts, pts.shape[0])
    return models


def evaluate_path(models, xs):
    """Evaluate several models sharing one bank with a single ranked encoding."""
    models = list(models)
    bank = models[0].bank
    kmax = max(mdl.k for mdl in models)
    codes = ranked_codes(bank, kmax, xs)
    return [mdl.scale_from_codes(codes[:, :mdl.k]) for mdl in models]


def save_model(model, path):
    """Write a versioned ``.npz`` model file (exact binary round trip)."""
    seed = model.bank.seed if isinstance(model.bank.seed, int) else -1
    with open(path, "wb") as fh:
        np.savez(
            fh,
            format=np.array(MODEL_FORMAT),
            version=np.array(MODEL_VERSION),
            d=np.array(model.d),
            m=np.array(model.m),
            k=np.array(model.k),
            n=np.array(model.n),
            seed=np.array(seed, dtype=np.int64),
            thetas=model.bank.thetas,
            counts=model.counts,
        )


def load_model(path):
    with np.load(path, allow_pickle=False) as z:
        if str(z["format"]) != MODEL_FORMAT:
            raise ValueError(f"{path}: not an EaS model file")
        version = int(z["version"])
        if version != MODEL_VERSION:
            raise ValueError(f"{path}: unsupported model version {version}")
        thetas = z["thetas"]
        d, m = int(z["d"]), int(z["m"])
        if thetas.shape != (m, d):
            raise ValueError(f"{path}: projection block has shape {thetas.shape}, expected {(m, d)}")
        seed = int(z["seed"])
        bank = ProjectionBank.__new__(ProjectionBank)
        # rows were validated when saved; keep them bit-for-bit
        th = np.ascontiguousarray(thetas, dtype=np.float64)
        th.setflags(write=False)
        object.__setattr__(bank, "thetas", th)
        object.__setattr__(bank, "seed", None if seed < 0 else seed)
        return EasModel(bank, int(z["k"]), z["counts"], int(z["n"]))


@dataclass
class RegionReport:
    """Monte-Carlo geometry of the regions ``C_j`` of one bank."""

    m: int
    k: int
    d: int
    probes: int
    regions: np.ndarray
    volume_ratios: np.ndarray
    diameters: np.ndarray
    volumes: np.ndarray
    diameter_bound: float
    deviation_scale: float

    @property
    def ratio_min(self):
        return float(self.volume_ratios.min())

    @property
    def ratio_max(self):
        return float(self.volume_ratios.max())

    @property
    def ratio_mean(self):
        return float(self.volume_ratios.mean())

    @property
    def max_diameter(self):
        return float(self.diameters.max())

    def fraction_within(self, lo, hi):
        r = self.volume_ratios
        return float(np.mean((r >= lo) & (r <= hi)))

    def summary(self):
        return {
            "m": self.m, "k": self.k, "d": self.d, "probes": self.probes,
            "regions": int(self.regions.shape[0]),
            "ratio_min": self.ratio_min, "ratio_max": self.ratio_max,
            "ratio_mean": self.ratio_mean,
            "max_diameter": self.max_diameter,
            "diameter_bound": self.diameter_bound,
            "deviation_scale": self.deviation_scale,
        }


def diameter_bound(d, m, k):
    """``(4/sqrt(3)) (6 sqrt(d) k/m)^{1/(d-1)}``, the high-probability bound on diam(C_j)."""
    return 4.0 / math.sqrt(3.0) * (6.0 * math.sqrt(d) * k / m) ** (1.0 / (d - 1))


def set_diameter(points):
    """Exact largest pairwise chordal distance, pruning points near the centroid."""
    n = points.shape[0]
    if n < 2:
        return 0.0
    c = points.mean(axis=0)
    radial = np.sqrt(np.sum((points - c) ** 2, axis=1))
    # two farthest-point sweeps give a lower bound on the diameter
    a = int(np.argmax(radial))
    da = np.sqrt(np.sum((points - points[a]) ** 2, axis=1))
    b = int(np.argmax(da))
    db = np.sqrt(np.sum((points - points[b]) ** 2, axis=1))
    lower = max(float(da[b]), float(db.max()))
    # a pair reaching the lower bound needs radial_p + radial_q >= lower
    keep = radial >= lower - radial.max() - 1e-12
    return max(lower, float(_kernels.max_pair_distance(np.ascontiguousarray(points[keep]))))


def region_diagnostics(bank, k, probes, seed=None, regions=100):
    """Estimate ``vol(C_j) / (S_{d-1} k/m)`` and ``diam(C_j)`` from uniform probes.

    ``regions`` indices are sampled without replacement; volumes for all ``m``
    regions are returned as well, which is what the exact-volume variant of
    the estimator (see ``reference_estimate``) needs.
    """
    k = _check_k(bank, k)
    if probes < 1:
        raise ValueError("probes must be >= 1")
    rng = np.random.default_rng(seed)
    pts = sample_uniform(bank.d, int(probes), rng)
    chosen = np.sort(rng.choice(bank.m, size=min(int(regions), bank.m), replace=False))
    codes = encode_batch(bank, k, pts)
    flat = codes.ravel()
    hits = np.bincount(flat, minlength=bank.m)
    area = surface_area(bank.d)
    volumes = hits / probes * area
    ratios = hits[chosen] * bank.m / (k * probes)
    order = np.argsort(flat, kind="stable")
    starts = np.searchsorted(flat[order], chosen, side="left")
    stops = np.searchsorted(flat[order], chosen, side="right")
    diam = np.empty(chosen.shape[0])
    for t, (lo, hi) in enumerate(zip(starts, stops)):
        rows = order[lo:hi] // k
        diam[t] = set_diameter(pts[rows])
    return RegionReport(
        m=bank.m, k=k, d=bank.d, probes=int(probes), regions=chosen,
        volume_ratios=ratios, diameters=diam, volumes=volumes,
        diameter_bound=diameter_bound(bank.d, bank.m, k),
        deviation_scale=math.sqrt(bank.d * math.log(bank.m) / k) if bank.m > 1 else 0.0,
    )


def reference_estimate(model, volumes, xs):
    """``(1/k) sum_{j in code(x)} (count_j/n) / vol(C_j)`` with supplied region volumes.

    Regions with zero estimated volume contribute nothing.
    """
    vol = np.asarray(volumes, dtype=np.float64)
    codes = encode_batch(model.bank, model.k, xs)
    frac = model.counts / model.n
    with np.errstate(divide="ignore", invalid="ignore"):
        per = np.where(vol > 0, frac / vol, 0.0)
    return per[codes].sum(axis=1) / model.k
