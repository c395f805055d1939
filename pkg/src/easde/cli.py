"""Command-line entry point: ``easde <command> [options]``.

``experiment``, ``diagnostics`` and ``rate`` read a config file (``--config``)
and accept ``--<key>`` flags for every config key; a flag replaces the file's
value.  ``fit``, ``eval`` and ``modes`` work on point files (``.npy`` or
comma/whitespace separated text, one point per row).
"""

import argparse
import csv
import sys

import numpy as np

from . import __version__
from .config import KEYS, ConfigError, parse_value, validate_config
from .eas import fit, load_model, make_bank, save_model
from .modes import recover_modes, single_mode, write_modes_csv
from .runner import fmt, run, truth_for
from .seeding import derive_rng, derive_seed

EXIT_CONFIG = 2
EXIT_IO = 3


def load_points(path):
    if str(path).endswith(".npy"):
        return np.load(path, allow_pickle=False).astype(np.float64)
    with open(path) as fh:
        first = fh.readline()
    delim = "," if "," in first else None
    try:
        [float(v) for v in first.replace(",", " ").split()]
        skip = 0
    except ValueError:
        skip = 1
    return np.atleast_2d(np.loadtxt(path, delimiter=delim, skiprows=skip, dtype=np.float64))


def _add_config_flags(p):
    p.add_argument("--config", help="key = value config file")
    for key in KEYS:
        p.add_argument("--" + key.replace("_", "-"), dest="cfg_" + key, type=parse_value, default=None,
                       metavar="VALUE", help=argparse.SUPPRESS)


def _config_from_args(args, force_task=None):
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    if force_task:
        overrides["task"] = force_task
    text, source = "", "flags"
    if args.config:
        with open(args.config) as fh:
            text, source = fh.read(), args.config
    return validate_config(text, source=source, overrides=overrides)


def cmd_experiment(args):
    config = _config_from_args(args)
    if config.task not in ("density-experiment", "mode-single", "mode-multi"):
        raise ConfigError([f"task: '{config.task}' has its own command; use 'easde {config.task}'"])
    run(config)
    print(f"wrote results to {config.output_dir}")


def cmd_diagnostics(args):
    config = _config_from_args(args, "diagnostics")
    run(config)
    print(f"wrote diagnostics to {config.output_dir}")


def cmd_rate(args):
    config = _config_from_args(args, "rate")
    manifest = run(config)
    for r in manifest["runs"]:
        print(f"seed {r['seed']}: slope {r['slope']:.4f} +/- {r['slope_se']:.4f}")


def cmd_fit(args):
    if args.data:
        data = load_points(args.data)
        bank_seed = args.seed
    else:
        config = _config_from_args(args)
        seed = config.seeds[0]
        data = truth_for(config, seed).sample(config.n_train, derive_rng(seed, "train"))
        bank_seed = args.seed if args.seed is not None else derive_seed(seed, "bank")
        args.m = args.m or config.m
        args.k = args.k or config.k
    if args.m is None or args.k is None:
        raise ConfigError(["fit: --m and --k are required"])
    model = fit(make_bank(data.shape[1], args.m, bank_seed), args.k, data)
    save_model(model, args.out)
    print(f"saved model (d={model.d}, m={model.m}, k={model.k}, n={model.n}) to {args.out}")


def cmd_eval(args):
    model = load_model(args.model)
    values = model(load_points(args.points))
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["index", "fhat"])
        for i, v in enumerate(values):
            w.writerow([i, fmt(float(v))])
    finally:
        if args.out:
            out.close()


def cmd_modes(args):
    model = load_model(args.model)
    data = load_points(args.data)
    if args.single:
        idx = single_mode(model, data, return_index=True)
        print(",".join(fmt(float(v)) for v in data[idx]))
        return
    eps = args.eps_tilde if args.eps_tilde == "auto" else float(args.eps_tilde)
    modes = recover_modes(model, data, args.k_graph, args.alpha, eps)
    if args.out:
        write_modes_csv(modes, data, args.out)
    print(f"{len(modes)} mode(s), eps_tilde = {modes.eps_tilde:.6g}")


def build_parser():
    parser = argparse.ArgumentParser(prog="easde", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"easde {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("experiment", help="run a density or mode experiment from a config")
    _add_config_flags(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("diagnostics", help="Monte-Carlo region volume and diameter report")
    _add_config_flags(p)
    p.set_defaults(func=cmd_diagnostics)

    p = sub.add_parser("rate", help="error-versus-n experiment with fitted log-log slope")
    _add_config_flags(p)
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("fit", help="fit an EaS model and save it")
    p.add_argument("--data", help="training points; omit to sample from --config")
    p.add_argument("--config")
    p.add_argument("--m", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--seed", type=int, help="projection bank seed")
    p.add_argument("--out", required=True)
    for key in KEYS:
        if key not in ("m", "k"):
            p.add_argument("--" + key.replace("_", "-"), dest="cfg_" + key, type=parse_value,
                           default=None, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="evaluate a saved model at points")
    p.add_argument("--model", required=True)
    p.add_argument("--points", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("modes", help="estimate modes of a saved model on sample points")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.add_argument("--single", action="store_true", help="only the highest-estimate point")
    p.add_argument("--k-graph", type=int)
    p.add_argument("--alpha", type=float, default=2.0 ** 0.5)
    p.add_argument("--eps-tilde", default="auto")
    p.set_defaults(func=cmd_modes)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print("invalid configuration:", file=sys.stderr)
        for line in exc.errors:
            print("  " + line, file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
