"""Seeded experiment pipelines behind the ``experiment``, ``diagnostics`` and ``rate`` commands.

Every run writes into ``output_dir``:

* ``results.csv``: one row per measured (estimator, parameter, seed);
* ``summary.csv``: mean and spread over seeds;
* ``manifest.json``: resolved configuration, derived seeds, selected
  hyperparameters, library version and wall-times;
* task-specific files (mode tables, persisted models).

The CSV files depend only on the configuration.  Wall-times go to the
manifest; the ``fit_ms``/``eval_ms`` columns are filled only when
``record_timings`` is set, since timings would break byte-identical reruns.
"""

import csv
import json
import math
import os
import platform
import time

import numpy as np

from . import __version__
from .baselines import kde_density_grid, knn_density_grid
from .eas import fit, make_bank, region_diagnostics, save_model
from .evaluation import (
    best_pairing,
    etv_from_values,
    rate_experiment,
    select_eas_k,
    select_kde_bandwidth,
    select_knn_k,
    selected,
    truth_mode,
)
from .modes import recover_modes, single_mode, write_modes_csv
from .seeding import derive_rng, derive_seed
from .vmf import VmfComponent, VmfMixture, mean_pair

SCHEMA_VERSION = 1

DENSITY_COLUMNS = ["schema_version", "estimator", "d", "expansion_factor", "m", "k_or_bandwidth",
                   "n_train", "seed", "etv", "sup_error", "fit_ms", "eval_ms"]
DENSITY_SUMMARY = ["schema_version", "estimator", "d", "expansion_factor", "m", "n_seeds",
                   "etv_mean", "etv_std", "sup_error_mean", "sup_error_std"]
MODE_COLUMNS = ["schema_version", "task", "d", "m", "k", "n_train", "seed", "n_modes", "eps_tilde",
                "error_max", "errors"]
DIAG_COLUMNS = ["schema_version", "d", "m", "k", "probes", "region", "volume_ratio", "diameter",
                "diameter_bound"]
RATE_COLUMNS = ["schema_version", "family", "d", "n", "trial", "k", "error"]
RATE_SUMMARY = ["schema_version", "family", "d", "n", "error_mean", "error_std", "slope", "slope_se"]


def fmt(value):
    """Stable text for a CSV cell: shortest round-trip repr for floats, blank for None."""
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


class Emitter:
    """Collects rows in memory and writes each file once, in a fixed order."""

    def __init__(self, out_dir):
        self.out_dir = out_dir
        os.makedirs(out_dir, exist_ok=True)
        probe = os.path.join(out_dir, ".write-test")
        with open(probe, "w"):
            pass
        os.remove(probe)

    def path(self, name):
        return os.path.join(self.out_dir, name)

    def write_csv(self, name, header, rows):
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) for v in row])

    def write_json(self, name, obj):
        with open(self.path(name), "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def truth_for(config, seed):
    """The target mixture: explicit in the config, or built from kappas with random means."""
    if config.mixture is not None:
        return VmfMixture.from_dict(config.mixture)
    kappas = config.kappas
    weights = config.weights if config.weights is not None else [1.0]
    mu1, mu2 = mean_pair(config.d, config.mean_angle, derive_seed(seed, "means"))
    means = [mu1, mu2][: len(kappas)]
    return VmfMixture([VmfComponent(mu, float(kp)) for mu, kp in zip(means, kappas)], weights)


def draw_splits(truth, config, seed):
    return (
        truth.sample(config.n_train, derive_rng(seed, "train")),
        truth.sample(config.n_val, derive_rng(seed, "val")),
        truth.sample(config.n_test, derive_rng(seed, "test")),
    )


def _ms(t0):
    return (time.perf_counter() - t0) * 1000.0


def _stats(values):
    arr = np.asarray(values, dtype=np.float64)
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), std


def _expansion_m(d, factor):
    return max(1, int(round(factor * d)))


def run_density(config, em, manifest):
    d = config.d
    rows = []
    timing = config.record_timings
    for s_idx, seed in enumerate(config.seeds):
        truth = truth_for(config, seed)
        train, val, test = draw_splits(truth, config, seed)
        f_test = truth.pdf(test)
        info = {"seed": seed, "truth": truth.to_dict(), "selected": {}, "wall_ms": {}}

        def record(name, factor, m, param, estimate, fit_ms, eval_ms):
            rep = etv_from_values(f_test, estimate)
            rows.append([SCHEMA_VERSION, name, d, factor, m, param, config.n_train, seed, rep.etv,
                         rep.sup_error, fit_ms if timing else None, eval_ms if timing else None])

        if "knnde" in config.estimators:
            t0 = time.perf_counter()
            k_nn = int(selected(select_knn_k(train, val, truth.pdf)).value)
            fit_ms = _ms(t0)
            t0 = time.perf_counter()
            est = knn_density_grid(train, test, [k_nn])[0]
            eval_ms = _ms(t0)
            record("knnde", None, None, k_nn, est, fit_ms, eval_ms)
            info["selected"]["knnde"] = {"k": k_nn}
            info["wall_ms"]["knnde"] = [fit_ms, eval_ms]
        if "kde" in config.estimators:
            t0 = time.perf_counter()
            h = selected(select_kde_bandwidth(train, val, truth.pdf, config.kde_kernel)).value
            fit_ms = _ms(t0)
            t0 = time.perf_counter()
            est = kde_density_grid(train, test, [h], config.kde_kernel)[0]
            eval_ms = _ms(t0)
            record("kde", None, None, h, est, fit_ms, eval_ms)
            info["selected"]["kde"] = {"bandwidth": h, "kernel": config.kde_kernel}
            info["wall_ms"]["kde"] = [fit_ms, eval_ms]
        if "eas" in config.estimators:
            info["selected"]["eas"] = []
            info["wall_ms"]["eas"] = []
            for f_idx, factor in enumerate(config.expansion_factors):
                m = _expansion_m(d, factor)
                bank_seed = derive_seed(seed, "bank", f_idx)
                t0 = time.perf_counter()
                bank = make_bank(d, m, bank_seed)
                if config.k is not None:
                    k = min(config.k, m)
                    model = fit(bank, k, train)
                else:
                    results, models = select_eas_k(m, d, train, val, truth.pdf, bank=bank)
                    k = int(selected(results).value)
                    model = models[k]
                fit_ms = _ms(t0)
                t0 = time.perf_counter()
                est = model(test)
                eval_ms = _ms(t0)
                record("eas", factor, m, k, est, fit_ms, eval_ms)
                info["selected"]["eas"].append({"expansion_factor": factor, "m": m, "k": k,
                                                "bank_seed": bank_seed})
                info["wall_ms"]["eas"].append([fit_ms, eval_ms])
                if config.save_models:
                    save_model(model, em.path(f"model_seed{seed}_ef{f_idx}.npz"))
        manifest["runs"].append(info)

    em.write_csv("results.csv", DENSITY_COLUMNS, rows)
    groups = {}
    for row in rows:
        groups.setdefault((row[1], row[3], row[4]), []).append(row)
    summary = []
    for (name, factor, m), grp in groups.items():
        etv_mean, etv_std = _stats([r[8] for r in grp])
        sup_mean, sup_std = _stats([r[9] for r in grp])
        summary.append([SCHEMA_VERSION, name, d, factor, m, len(grp), etv_mean, etv_std, sup_mean, sup_std])
    em.write_csv("summary.csv", DENSITY_SUMMARY, summary)
    return rows


def _mode_model(config, truth, train, val, seed):
    m = config.m if config.m is not None else config.n_train
    bank = make_bank(config.d, m, derive_seed(seed, "bank"))
    if config.k is not None:
        return fit(bank, min(config.k, m), train)
    results, models = select_eas_k(m, config.d, train, val, truth.pdf, bank=bank)
    return models[int(selected(results).value)]


def run_modes(config, em, manifest):
    multi = config.task == "mode-multi"
    rows = []
    for seed in config.seeds:
        truth = truth_for(config, seed)
        train = truth.sample(config.n_train, derive_rng(seed, "train"))
        val = truth.sample(config.n_val, derive_rng(seed, "val"))
        t0 = time.perf_counter()
        model = _mode_model(config, truth, train, val, seed)
        fit_ms = _ms(t0)
        t0 = time.perf_counter()
        if multi:
            modes = recover_modes(model, train, config.k_graph, config.alpha, config.eps_tilde)
            found = modes.points(train)
            errors = best_pairing([c.mu for c in truth.components], found)
            eps = modes.eps_tilde
            write_modes_csv(modes, train, em.path(f"modes_seed{seed}.csv"))
        else:
            idx = single_mode(model, train, return_index=True)
            found = train[[idx]]
            errors = [float(np.linalg.norm(found[0] - truth_mode(truth)))]
            eps = None
            with open(em.path(f"modes_seed{seed}.csv"), "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["mode_rank", "sample_index", *(f"x{c}" for c in range(config.d))])
                w.writerow([0, idx, *(fmt(v) for v in found[0])])
        mode_ms = _ms(t0)
        err_max = max(errors) if errors else None
        rows.append([SCHEMA_VERSION, config.task, config.d, model.m, model.k, config.n_train, seed,
                     len(found), eps, err_max, ";".join(fmt(e) for e in errors)])
        if config.save_models:
            save_model(model, em.path(f"model_seed{seed}.npz"))
        manifest["runs"].append({"seed": seed, "truth": truth.to_dict(), "m": model.m, "k": model.k,
                                 "bank_seed": model.bank.seed, "eps_tilde": eps,
                                 "wall_ms": {"fit": fit_ms, "modes": mode_ms}})
    em.write_csv("results.csv", MODE_COLUMNS, rows)
    return rows


def run_diagnostics(config, em, manifest):
    m = config.m if config.m is not None else _expansion_m(config.d, config.expansion_factors[0])
    k = config.k if config.k is not None else min(m, int(round(config.d * math.log(m))))
    rows = []
    summary = []
    for seed in config.seeds:
        t0 = time.perf_counter()
        bank = make_bank(config.d, m, derive_seed(seed, "bank"))
        rep = region_diagnostics(bank, k, config.probes, derive_seed(seed, "probes"), config.regions)
        for j, ratio, diam in zip(rep.regions, rep.volume_ratios, rep.diameters):
            rows.append([SCHEMA_VERSION, config.d, m, k, config.probes, j, ratio, diam, rep.diameter_bound])
        summary.append({"seed": seed, **rep.summary()})
        manifest["runs"].append({"seed": seed, "m": m, "k": k, "bank_seed": bank.seed,
                                 "wall_ms": _ms(t0)})
    em.write_csv("results.csv", DIAG_COLUMNS, rows)
    em.write_json("diagnostics_summary.json", summary)
    return rows


def run_rate(config, em, manifest):
    rows, summary = [], []
    for seed in config.seeds:
        truth = truth_for(config, seed)
        t0 = time.perf_counter()
        res = rate_experiment(config.family, config.d, truth, config.n_grid, config.trials, seed,
                              n_val=config.n_val, n_test=config.n_test)
        for i, n in enumerate(res.ns):
            for t in range(config.trials):
                rows.append([SCHEMA_VERSION, config.family, config.d, n, t, res.selected_k[i, t],
                             res.errors[i, t]])
        for n, mean, std in res.table():
            summary.append([SCHEMA_VERSION, config.family, config.d, n, mean, std, res.slope, res.slope_se])
        manifest["runs"].append({"seed": seed, "truth": truth.to_dict(), "slope": res.slope,
                                 "slope_se": res.slope_se, "selected_k": res.selected_k,
                                 "wall_ms": _ms(t0)})
    em.write_csv("results.csv", RATE_COLUMNS, rows)
    em.write_csv("summary.csv", RATE_SUMMARY, summary)
    return rows


PIPELINES = {
    "density-experiment": run_density,
    "mode-single": run_modes,
    "mode-multi": run_modes,
    "diagnostics": run_diagnostics,
    "rate": run_rate,
}


def run(config):
    """Execute ``config`` and return the manifest that was written."""
    em = Emitter(config.output_dir)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "library_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": config.to_dict(),
        "seed_streams": "derive_seed(base, stream, *index) via numpy SeedSequence spawn keys",
        "runs": [],
    }
    t0 = time.perf_counter()
    PIPELINES[config.task](config, em, manifest)
    manifest["wall_ms_total"] = _ms(t0)
    em.write_json("manifest.json", manifest)
    return manifest
