"""Geometry on the unit sphere S^{d-1}.

Points are stored as rows of float64 arrays.  All balls are chordal:
``B(x, r) = {y : ||x - y|| <= r}`` with ``0 <= r <= 2``.

The uniform mass of a cap follows from the fact that the first coordinate
``t`` of a uniform point satisfies ``t**2 ~ Beta(1/2, (d-1)/2)``, which gives

    mass(r) = 1/2 * I_x((d-1)/2, 1/2),   x = r**2 (1 - r**2/4) = 1 - t**2

with ``t = 1 - r**2/2`` for ``r <= sqrt(2)``, and ``1 - mass(sqrt(4 - r**2))``
beyond the hemisphere.  Near the hemisphere the equivalent form
``1/2 - sign(t)/2 * I_{t^2}(1/2, (d-1)/2)`` is used instead.
"""

import math

import numpy as np
from numba import njit

UNIT_TOL = 1e-6

_CF_TOL = 1e-15
_CF_MAXITER = 10_000
_TINY = 1e-300


class DimensionError(ValueError):
    pass


class DomainError(ValueError):
    pass


def check_dimension(d):
    if int(d) != d or d < 2:
        raise DimensionError(f"dimension must be an integer >= 2, got {d!r}")
    return int(d)


def as_unit(x, d=None):
    """Validate points as unit vectors and return a float64 array.

    Accepts a single vector or an (n, d) array.  Rows within ``UNIT_TOL`` of
    unit norm are renormalized; anything farther is rejected.
    """
    arr = np.array(x, dtype=np.float64)
    if arr.ndim not in (1, 2):
        raise ValueError(f"expected a vector or a 2-d array, got shape {arr.shape}")
    if arr.shape[-1] < 2:
        raise DimensionError(f"dimension must be >= 2, got {arr.shape[-1]}")
    if d is not None and arr.shape[-1] != d:
        raise DimensionError(f"expected dimension {d}, got {arr.shape[-1]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("points must be finite")
    norms = np.linalg.norm(arr, axis=-1)
    bad = np.abs(norms - 1.0) > UNIT_TOL
    if np.any(bad):
        worst = float(np.max(np.abs(norms - 1.0)))
        raise ValueError(f"input is not on the unit sphere (norm deviation {worst:.3g})")
    return arr / norms[..., None]


def normalize(x):
    """Project nonzero vectors radially onto the sphere."""
    arr = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(arr, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("cannot normalize the zero vector")
    return arr / norms


def surface_area(d):
    """Surface area ``2 pi^{d/2} / Gamma(d/2)`` of S^{d-1}."""
    d = check_dimension(d)
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def log_surface_area(d):
    d = check_dimension(d)
    return math.log(2.0) + (d / 2.0) * math.log(math.pi) - math.lgamma(d / 2.0)


def sample_uniform(d, count, seed=None):
    """Draw ``count`` i.i.d. uniform points as a ``(count, d)`` array."""
    d = check_dimension(d)
    if count < 0:
        raise ValueError("count must be >= 0")
    rng = np.random.default_rng(seed)
    y = rng.standard_normal((int(count), d))
    if count == 0:
        return y
    norms = np.linalg.norm(y, axis=1)
    # zero-norm draws have probability 0; redraw them anyway
    while np.any(norms == 0):
        idx = np.flatnonzero(norms == 0)
        y[idx] = rng.standard_normal((idx.size, d))
        norms = np.linalg.norm(y, axis=1)
    return y / norms[:, None]


def chordal_distance(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return np.sqrt(np.sum((x - y) ** 2, axis=-1))


@njit(cache=True)
def _betacf(a, b, x):
    # modified Lentz evaluation of the continued fraction for I_x(a, b)
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    dd = 1.0 - qab * x / qap
    if abs(dd) < _TINY:
        dd = _TINY
    dd = 1.0 / dd
    h = dd
    for it in range(1, _CF_MAXITER + 1):
        m2 = 2 * it
        aa = it * (b - it) * x / ((qam + m2) * (a + m2))
        dd = 1.0 + aa * dd
        if abs(dd) < _TINY:
            dd = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        dd = 1.0 / dd
        h *= dd * c
        aa = -(a + it) * (qab + it) * x / ((a + m2) * (qap + m2))
        dd = 1.0 + aa * dd
        if abs(dd) < _TINY:
            dd = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        dd = 1.0 / dd
        delta = dd * c
        h *= delta
        if abs(delta - 1.0) < _CF_TOL:
            return h
    return np.nan


@njit(cache=True)
def _betainc_scalar(a, b, x):
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


@njit(cache=True)
def _betainc_array(a, b, x):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        out[i] = _betainc_scalar(a, b, x[i])
    return out


def betainc(a, b, x):
    """Regularized incomplete Beta function ``I_x(a, b)`` (continued fraction)."""
    if a <= 0 or b <= 0:
        raise DomainError("Beta parameters must be positive")
    xa = np.asarray(x, dtype=np.float64)
    if np.any((xa < 0) | (xa > 1)):
        raise DomainError("x must lie in [0, 1]")
    out = _betainc_array(float(a), float(b), np.atleast_1d(xa).ravel())
    if np.any(np.isnan(out)):
        raise ArithmeticError("incomplete Beta continued fraction did not converge")
    if xa.ndim == 0:
        return float(out[0])
    return out.reshape(xa.shape)


@njit(cache=True)
def _cap_mass_array(d, r):
    a = 0.5 * (d - 1)
    out = np.empty(r.shape[0])
    for i in range(r.shape[0]):
        r2 = r[i] * r[i]
        t = 1.0 - 0.5 * r2
        if t * t < 0.5:
            # near the hemisphere the t^2 form is the well-conditioned one
            tail = 0.5 * _betainc_scalar(0.5, a, t * t)
            out[i] = 0.5 - tail if t >= 0.0 else 0.5 + tail
        else:
            half = 0.5 * _betainc_scalar(a, 0.5, r2 * (1.0 - 0.25 * r2))
            out[i] = half if t > 0.0 else 1.0 - half
    return out


def cap_mass(d, r):
    """Uniform probability of a cap of chordal radius ``r`` (scalar or array)."""
    d = check_dimension(d)
    ra = np.asarray(r, dtype=np.float64)
    if np.any(~np.isfinite(ra)) or np.any((ra < 0) | (ra > 2)):
        raise DomainError("chordal radius must lie in [0, 2]")
    out = _cap_mass_array(d, np.atleast_1d(ra).ravel())
    if ra.ndim == 0:
        return float(out[0])
    return out.reshape(ra.shape)


def cap_volume(d, r):
    """Surface area of a chordal cap: ``cap_mass(d, r) * surface_area(d)``."""
    return cap_mass(d, r) * surface_area(d)


def cap_radius(d, mass, maxiter=200):
    """Chordal radius of the cap with the given uniform mass, by bisection."""
    d = check_dimension(d)
    mass = float(mass)
    if not 0.0 <= mass <= 1.0:
        raise DomainError("mass must lie in [0, 1]")
    if mass == 0.0:
        return 0.0
    if mass == 1.0:
        return 2.0
    lo, hi = 0.0, 2.0
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if cap_mass(d, mid) < mass:
            lo = mid
        else:
            hi = mid
    # pick the bracket end with the smaller residual
    if abs(cap_mass(d, lo) - mass) < abs(cap_mass(d, hi) - mass):
        return lo
    return hi


def householder_to(mu):
    """Orthogonal matrix ``H`` with ``H @ e1 = mu`` (a reflection, or identity)."""
    mu = np.asarray(mu, dtype=np.float64)
    d = mu.shape[0]
    e1 = np.zeros(d)
    e1[0] = 1.0
    v = e1 - mu
    nv = np.dot(v, v)
    if nv < 1e-30:
        return np.eye(d)
    return np.eye(d) - 2.0 * np.outer(v, v) / nv


def tangent_uniform(mu, count, rng):
    """Uniform unit vectors orthogonal to ``mu``, shape ``(count, d)``."""
    mu = np.asarray(mu, dtype=np.float64)
    d = mu.shape[0]
    out = np.empty((count, d))
    filled = 0
    while filled < count:
        y = rng.standard_normal((count - filled, d))
        y -= np.outer(y @ mu, mu)
        norms = np.linalg.norm(y, axis=1)
        ok = norms > 1e-12
        good = y[ok] / norms[ok, None]
        out[filled:filled + good.shape[0]] = good
        filled += good.shape[0]
    return out
