"""Accuracy metrics, validation-set hyperparameter search, and rate experiments.

Grids follow the empirical protocol the estimators are compared under:

* kNN: ``{1, 10, 50, ln n, sqrt n, n/8, n/4, n/2, 3n/4}``, rounded, clamped to
  ``[1, n-1]`` and deduplicated;
* KDE: 20 log-spaced bandwidths from 0.01 to 1;
* EaS: the integers ``round(d ln m) - 8 .. round(d ln m) + 8`` within ``[1, m]``.

Logarithms are natural throughout.  Each search picks the candidate with the
smallest validation ETV; ties go to the smaller parameter value.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .baselines import kde_density_grid, knn_density_grid
from .eas import evaluate_path, fit_path, make_bank
from .modes import single_mode
from .seeding import derive_rng, derive_seed


@dataclass
class EtvReport:
    etv: float
    sup_error: float
    M: int


def etv_from_values(truth, estimate):
    truth = np.asarray(truth, dtype=np.float64)
    estimate = np.asarray(estimate, dtype=np.float64)
    if truth.shape != estimate.shape or truth.ndim != 1 or truth.shape[0] == 0:
        raise ValueError("need two equal-length, nonempty value vectors")
    diff = np.abs(truth - estimate)
    return EtvReport(float(diff.sum() / (2 * diff.shape[0])), float(diff.max()), int(diff.shape[0]))


def etv(truth, estimate, test):
    """``(1/2M) sum |f(x_i) - f_hat(x_i)|`` and ``max_i |f(x_i) - f_hat(x_i)|`` over ``test``.

    ``truth`` and ``estimate`` are callables mapping an (M, d) array to M values.
    """
    test = np.atleast_2d(np.asarray(test, dtype=np.float64))
    if test.shape[0] == 0:
        raise ValueError("test set is empty")
    return etv_from_values(truth(test), estimate(test))


@dataclass
class GridResult:
    value: float
    val_etv: float
    selected: bool = False


def _mark_best(values, etvs):
    best = min(range(len(values)), key=lambda i: (etvs[i], values[i]))
    return [GridResult(v, float(e), i == best) for i, (v, e) in enumerate(zip(values, etvs))]


def selected(results):
    return next(r for r in results if r.selected)


def knn_k_grid(n):
    if n < 2:
        raise ValueError("kNN selection needs n >= 2")
    raw = [1, 10, 50, math.log(n), math.sqrt(n), n / 8, n / 4, n / 2, 3 * n / 4]
    return sorted({min(max(int(round(v)), 1), n - 1) for v in raw})


def kde_bandwidth_grid():
    return np.logspace(-2, 0, 20)


def eas_k_grid(m, d):
    center = int(round(d * math.log(m)))
    return sorted({min(max(k, 1), m) for k in range(center - 8, center + 9)})


def _val_etvs(truth_val, estimates):
    return [etv_from_values(truth_val, est).etv for est in estimates]


def select_knn_k(train, val, truth, grid=None):
    """Validation-ETV search over the kNN neighbour count."""
    train = np.atleast_2d(train)
    grid = knn_k_grid(train.shape[0]) if grid is None else list(grid)
    est = knn_density_grid(train, val, grid)
    return _mark_best(grid, _val_etvs(truth(val), est))


def select_kde_bandwidth(train, val, truth, kernel="vmf", grid=None):
    grid = [float(h) for h in (kde_bandwidth_grid() if grid is None else grid)]
    est = kde_density_grid(train, val, grid, kernel)
    return _mark_best(grid, _val_etvs(truth(val), est))


def select_eas_k(m, d, train, val, truth, seed=None, grid=None, bank=None):
    """Validation-ETV search over k, every candidate sharing one projection bank.

    Returns ``(results, models)`` where ``models`` maps k to its fitted model.
    """
    if bank is None:
        bank = make_bank(d, m, seed)
    grid = eas_k_grid(bank.m, bank.d) if grid is None else sorted(set(grid))
    models = fit_path(bank, grid, train)
    est = evaluate_path([models[k] for k in grid], val)
    return _mark_best(grid, _val_etvs(truth(val), est)), models


def fit_loglog_slope(ns, errors):
    """OLS slope of log(error) against log(n) and its standard error."""
    x = np.log(np.asarray(ns, dtype=np.float64))
    y = np.log(np.asarray(errors, dtype=np.float64))
    if x.shape[0] < 2:
        raise ValueError("need at least two points for a slope")
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ (y - y.mean()) / sxx)
    if x.shape[0] > 2:
        resid = y - y.mean() - slope * xc
        se = math.sqrt(float(resid @ resid) / (x.shape[0] - 2) / sxx)
    else:
        se = float("nan")
    return slope, se


@dataclass
class RateResult:
    family: str
    ns: list
    errors: np.ndarray  # shape (len(ns), trials)
    selected_k: np.ndarray
    slope: float = field(init=False)
    slope_se: float = field(init=False)

    def __post_init__(self):
        self.slope, self.slope_se = fit_loglog_slope(self.ns, self.mean)

    @property
    def mean(self):
        return self.errors.mean(axis=1)

    @property
    def std(self):
        return self.errors.std(axis=1, ddof=1) if self.errors.shape[1] > 1 else np.zeros(len(self.ns))

    def table(self):
        return [(n, float(mu), float(sd)) for n, mu, sd in zip(self.ns, self.mean, self.std)]


def truth_mode(truth):
    """Mode of a mixture whose highest-density component mean is the global mode."""
    peaks = [w * c.pdf(c.mu) for w, c in zip(truth.weights, truth.components)]
    return truth.components[int(np.argmax(peaks))].mu


def best_pairing(true_modes, found):
    """Errors ``||true_i - found_pi(i)||`` under the injective matching with the smallest
    worst-case error (then smallest total).  With fewer found than true modes,
    only ``len(found)`` true modes are matched."""
    true_modes = np.atleast_2d(np.asarray(true_modes, dtype=np.float64))
    found = np.atleast_2d(np.asarray(found, dtype=np.float64))
    if found.shape[0] == 0 or found.shape[1] == 0:
        return []
    dist = np.linalg.norm(true_modes[:, None, :] - found[None, :, :], axis=2)
    t, f = dist.shape
    best = None
    if t <= f:
        choices = ((tuple(range(t)), p) for p in itertools.permutations(range(f), t))
    else:
        choices = ((p, tuple(range(f))) for p in itertools.permutations(range(t), f))
    for rows, cols in choices:
        errs = dist[list(rows), list(cols)]
        key = (float(errs.max()), float(errs.sum()))
        if best is None or key < best[0]:
            best = (key, rows, errs)
    order = np.argsort(best[1], kind="stable")
    return [float(e) for e in best[2][order]]


def eas_trial(family, truth, n, train, val, test, bank_seed):
    """Fit EaS with m = n and a validation-selected k; return (error, k)."""
    d = truth.d
    results, models = select_eas_k(n, d, train, val, truth.pdf, seed=bank_seed)
    k = int(selected(results).value)
    model = models[k]
    if family == "density":
        err = etv_from_values(truth.pdf(test), evaluate_path([model], test)[0]).sup_error
    else:
        err = float(np.linalg.norm(single_mode(model, train) - truth_mode(truth)))
    return err, k


def rate_experiment(family, d, truth, n_grid, trials, seed, n_val=2000, n_test=2000, estimator=None):
    """Error of EaS as n grows, with m = n and validation-selected k.

    ``family="density"`` records the sup error over a fresh test set,
    ``family="mode"`` the distance from the single-mode estimate to the true
    mode.  ``estimator(family, truth, n, train, val, test, bank_seed)`` may
    replace the EaS pipeline; it must return ``(error, parameter)``.
    """
    if family not in ("density", "mode"):
        raise ValueError("family must be 'density' or 'mode'")
    if truth.d != d:
        raise ValueError("truth dimension does not match d")
    ns = [int(n) for n in n_grid]
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError("n_grid must be strictly increasing")
    if trials < 3:
        raise ValueError("trials must be >= 3")
    estimator = estimator or eas_trial
    errors = np.empty((len(ns), trials))
    ks = np.empty((len(ns), trials), dtype=np.int64)
    for i, n in enumerate(ns):
        for t in range(trials):
            train = truth.sample(n, derive_rng(seed, "train", i, t))
            val = truth.sample(n_val, derive_rng(seed, "val", i, t))
            test = truth.sample(n_test, derive_rng(seed, "test", i, t))
            err, k = estimator(family, truth, n, train, val, test, derive_seed(seed, "bank", i, t))
            errors[i, t] = err
            ks[i, t] = k
    return RateResult(family, ns, errors, ks)
