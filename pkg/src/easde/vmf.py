"""von Mises-Fisher densities, finite mixtures, and exact samplers on S^{d-1}."""

import math
from dataclasses import dataclass

import numpy as np

from .sphere import as_unit, check_dimension, householder_to, sample_uniform, tangent_uniform

LOG_2PI = math.log(2.0 * math.pi)

# series below this kappa, large-argument expansion above (scaled by sqrt(nu))
_SWITCH = 50.0
_SERIES_RTOL = 1e-18


def _log_bessel_series(nu, kappa):
    half = math.log(0.5 * kappa)
    log_term = nu * half - math.lgamma(nu + 1.0)
    terms = [log_term]
    j = 0
    peak = log_term
    while True:
        log_term += 2.0 * half - math.log(j + 1.0) - math.log(j + nu + 1.0)
        j += 1
        terms.append(log_term)
        if log_term > peak:
            peak = log_term
        elif log_term < peak + math.log(_SERIES_RTOL):
            break
    t = np.array(terms)
    return float(peak + math.log(np.sum(np.exp(t - peak))))


def _log_bessel_asymptotic(nu, kappa):
    """Hankel expansion ``I_nu(k) ~ e^k / sqrt(2 pi k) * sum (-1)^j a_j(nu) / k^j``.

    Returns None if the terms stop shrinking before reaching double precision.
    """
    mu = 4.0 * nu * nu
    term = 1.0
    total = 1.0
    prev = 1.0
    for j in range(1, 500):
        term *= -(mu - (2 * j - 1) ** 2) / (8.0 * j * kappa)
        if term == 0.0:
            break
        if abs(term) > abs(prev):
            return None
        total += term
        if abs(term) < 1e-17 * abs(total):
            break
        prev = term
    if total <= 0.0:
        return None
    return kappa - 0.5 * math.log(2.0 * math.pi * kappa) + math.log(total)


def log_bessel_i(nu, kappa):
    """``log I_nu(kappa)`` for ``nu >= 0`` and ``kappa > 0``, computed in log space."""
    nu = float(nu)
    kappa = float(kappa)
    if nu < 0 or not math.isfinite(nu):
        raise ValueError("order nu must be finite and >= 0")
    if kappa <= 0 or not math.isfinite(kappa):
        raise ValueError("argument kappa must be finite and > 0")
    if kappa > _SWITCH * max(1.0, math.sqrt(nu)):
        val = _log_bessel_asymptotic(nu, kappa)
        if val is not None:
            return val
    return _log_bessel_series(nu, kappa)


def mean_resultant_length(d, kappa):
    """``A_d(kappa) = I_{d/2}(kappa) / I_{d/2-1}(kappa)``, the mean of ``mu . x``."""
    return math.exp(log_bessel_i(d / 2.0, kappa) - log_bessel_i(d / 2.0 - 1.0, kappa))


def log_normalizer(d, kappa):
    """Log of ``kappa^{d/2-1} / ((2 pi)^{d/2} I_{d/2-1}(kappa))``."""
    nu = d / 2.0 - 1.0
    return nu * math.log(kappa) - (d / 2.0) * LOG_2PI - log_bessel_i(nu, kappa)


@dataclass(frozen=True, eq=False)
class VmfComponent:
    mu: np.ndarray
    kappa: float

    def __post_init__(self):
        mu = as_unit(self.mu)
        if mu.ndim != 1:
            raise ValueError("mu must be a single vector")
        kappa = float(self.kappa)
        if not (kappa > 0 and math.isfinite(kappa)):
            raise ValueError(f"kappa must be positive, got {self.kappa!r}")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "kappa", kappa)
        # kappa * (t - 1) keeps the exponent bounded for large kappa
        object.__setattr__(self, "_log_peak", log_normalizer(mu.shape[0], kappa) + kappa)

    @property
    def d(self):
        return self.mu.shape[0]

    def logpdf(self, x):
        x = as_unit(x, self.d)
        return self._log_peak + self.kappa * (x @ self.mu - 1.0)

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def sample(self, count, seed=None):
        return vmf_sample(self, count, seed)


@dataclass(frozen=True, eq=False)
class VmfMixture:
    components: tuple
    weights: np.ndarray

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("a mixture needs at least one component")
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        if w.shape[0] != len(comps):
            raise ValueError("one weight per component is required")
        if np.any(w <= 0):
            raise ValueError("mixture weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"mixture weights must sum to 1, got {w.sum():.15g}")
        dims = {c.d for c in comps}
        if len(dims) != 1:
            raise ValueError("all components must share the same dimension")
        w.setflags(write=False)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "weights", w)

    @classmethod
    def single(cls, mu, kappa):
        return cls((VmfComponent(mu, kappa),), [1.0])

    @property
    def d(self):
        return self.components[0].d

    def pdf(self, x):
        x = as_unit(x, self.d)
        total = np.zeros(x.shape[:-1])
        for w, comp in zip(self.weights, self.components):
            total = total + w * comp.pdf(x)
        return total

    def sample(self, count, seed=None):
        return mixture_sample(self, count, seed)

    def to_dict(self):
        return [{"mu": [float(v) for v in c.mu], "kappa": c.kappa, "weight": float(w)}
                for c, w in zip(self.components, self.weights)]

    @classmethod
    def from_dict(cls, items):
        comps = [VmfComponent(item["mu"], item["kappa"]) for item in items]
        return cls(comps, [item["weight"] for item in items])


def vmf_pdf(comp, x):
    """Surface density of one vMF component at ``x`` (vector or rows)."""
    return comp.pdf(x)


def mixture_pdf(mix, x):
    return mix.pdf(x)


def _sample_cosines(d, kappa, count, rng):
    """Draw ``t = mu . x`` by Wood's rejection scheme with a Beta envelope."""
    dm1 = d - 1.0
    b = dm1 / (2.0 * kappa + math.sqrt(4.0 * kappa * kappa + dm1 * dm1))
    x0 = (1.0 - b) / (1.0 + b)
    c = kappa * x0 + dm1 * math.log(1.0 - x0 * x0)
    out = np.empty(count)
    filled = 0
    while filled < count:
        batch = max(16, int(1.2 * (count - filled)) + 8)
        z = rng.beta(dm1 / 2.0, dm1 / 2.0, size=batch)
        u = rng.uniform(size=batch)
        w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z)
        ok = kappa * w + dm1 * np.log1p(-x0 * w) - c >= np.log(u)
        acc = w[ok][: count - filled]
        out[filled:filled + acc.shape[0]] = acc
        filled += acc.shape[0]
    return out


def vmf_sample(comp, count, seed=None):
    """``count`` i.i.d. draws from ``comp`` as a ``(count, d)`` array."""
    if count < 0:
        raise ValueError("count must be >= 0")
    rng = np.random.default_rng(seed)
    d = comp.d
    if count == 0:
        return np.empty((0, d))
    t = _sample_cosines(d, comp.kappa, count, rng)
    e1 = np.zeros(d)
    e1[0] = 1.0
    v = tangent_uniform(e1, count, rng)
    pts = t[:, None] * e1 + np.sqrt(np.clip(1.0 - t * t, 0.0, None))[:, None] * v
    pts = pts @ householder_to(comp.mu).T
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def mixture_sample(mix, count, seed=None):
    """Pick components by weight, then draw from each; returns ``(count, d)``."""
    if count < 0:
        raise ValueError("count must be >= 0")
    rng = np.random.default_rng(seed)
    out = np.empty((count, mix.d))
    if count == 0:
        return out
    labels = rng.choice(len(mix.components), size=count, p=mix.weights)
    for j, comp in enumerate(mix.components):
        idx = np.flatnonzero(labels == j)
        if idx.size:
            out[idx] = vmf_sample(comp, idx.size, rng)
    return out


def mean_pair(d, angle, seed=None):
    """Two mean directions at exactly ``angle`` apart, the first uniform."""
    d = check_dimension(d)
    if not 0.0 < angle < math.pi:
        raise ValueError("angle must lie in (0, pi)")
    rng = np.random.default_rng(seed)
    mu1 = sample_uniform(d, 1, rng)[0]
    v = tangent_uniform(mu1, 1, rng)[0]
    mu2 = math.cos(angle) * mu1 + math.sin(angle) * v
    return mu1, mu2 / np.linalg.norm(mu2)
