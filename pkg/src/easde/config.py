"""Experiment configuration files.

The format is one ``key = value`` pair per line.  Values are JSON (numbers,
``true``/``false``, strings, lists, objects); a value that is not valid JSON
is taken as a bare string, so ``task = rate`` works without quotes.  A value
whose brackets are still open at the end of a line continues on the next
lines.  Lines starting with ``#`` are comments.

Validation collects every problem and reports each with its line number.
"""

import json
import math
from dataclasses import dataclass, field

TASKS = ("density-experiment", "mode-single", "mode-multi", "diagnostics", "rate")
ESTIMATORS = ("eas", "knnde", "kde")
DEFAULT_SIZES = (10_000, 2_000, 10_000)


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


@dataclass
class ExperimentConfig:
    task: str
    d: int
    seeds: list
    output_dir: str
    mixture: list = None
    kappas: list = None
    weights: list = None
    mean_angle: float = math.pi / 4
    n_train: int = DEFAULT_SIZES[0]
    n_val: int = DEFAULT_SIZES[1]
    n_test: int = DEFAULT_SIZES[2]
    expansion_factors: list = field(default_factory=lambda: [8.0])
    estimators: list = field(default_factory=lambda: list(ESTIMATORS))
    kde_kernel: str = "vmf"
    k: int = None
    m: int = None
    k_graph: int = None
    alpha: float = math.sqrt(2.0)
    eps_tilde: object = "auto"
    probes: int = 200_000
    regions: int = 100
    family: str = "density"
    n_grid: list = field(default_factory=lambda: [1000, 4000, 16000, 64000])
    trials: int = 5
    save_models: bool = False
    record_timings: bool = False

    def to_dict(self):
        return {name: getattr(self, name) for name in KEYS}


REQUIRED = ("task", "d", "seeds", "output_dir")
KEYS = tuple(ExperimentConfig.__dataclass_fields__)


def parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text.strip()


def _balanced(text):
    depth = 0
    in_str = False
    esc = False
    for ch in text:
        if in_str:
            if esc:
                esc = False
            elif ch == "\\":
                esc = True
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
        elif ch in "[{":
            depth += 1
        elif ch in "]}":
            depth -= 1
    return depth <= 0


def parse_pairs(text, source="config"):
    """Split config text into ``{key: (value, line)}``; returns (pairs, errors)."""
    pairs, errors = {}, []
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        raw = lines[i].strip()
        lineno = i + 1
        i += 1
        if not raw or raw.startswith("#"):
            continue
        if "=" not in raw:
            errors.append(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
            continue
        key, _, value = raw.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        while not _balanced(value) and i < len(lines):
            value += "\n" + lines[i]
            i += 1
        if key in pairs:
            errors.append(f"{source}:{lineno}: {key}: duplicate key (first set on line {pairs[key][1]})")
            continue
        pairs[key] = (parse_value(value), lineno)
    return pairs, errors


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _check_mixture(items, d, err):
    if not isinstance(items, list) or not items:
        err("must be a nonempty list of {mu, kappa, weight} objects")
        return
    total = 0.0
    for t, item in enumerate(items):
        if not isinstance(item, dict) or set(item) != {"mu", "kappa", "weight"}:
            err(f"component {t} must have exactly the keys mu, kappa, weight")
            return
        mu = item["mu"]
        if not isinstance(mu, list) or not all(_is_num(v) for v in mu):
            err(f"component {t}: mu must be a list of numbers")
            return
        if _is_int(d) and len(mu) != d:
            err(f"component {t}: mu has {len(mu)} entries, expected d = {d}")
        norm = math.sqrt(sum(v * v for v in mu))
        if abs(norm - 1.0) > 1e-6:
            err(f"component {t}: mu must be a unit vector (norm {norm:.6g})")
        if not _is_num(item["kappa"]) or item["kappa"] <= 0:
            err(f"component {t}: kappa must be a positive number")
        if not _is_num(item["weight"]) or item["weight"] <= 0:
            err(f"component {t}: weight must be a positive number")
            return
        total += item["weight"]
    if abs(total - 1.0) > 1e-12:
        err(f"mixture weights must sum to 1 (got {total:.12g})")


def validate_config(text, source="config", overrides=None):
    """Parse and check a configuration; raises ``ConfigError`` listing every problem.

    ``overrides`` maps keys to already-parsed values that replace the file's.
    """
    pairs, errors = parse_pairs(text, source)
    for key, value in (overrides or {}).items():
        pairs[key.replace("-", "_")] = (value, None)

    def where(key):
        line = pairs[key][1] if key in pairs else None
        return f"{source}:{line}: {key}" if line else f"{source}: {key}"

    def error_for(key):
        return lambda msg: errors.append(f"{where(key)}: {msg}")

    for key in pairs:
        if key not in KEYS:
            errors.append(f"{where(key)}: unknown key")
    for key in REQUIRED:
        if key not in pairs:
            errors.append(f"{source}: missing required key '{key}'")
    if "mixture" not in pairs and "kappas" not in pairs and pairs.get("task", (None,))[0] != "diagnostics":
        errors.append(f"{source}: missing required key 'mixture' (or 'kappas' with 'weights')")

    values = {k: v for k, (v, _) in pairs.items() if k in KEYS}

    def check(key, ok, msg):
        if key in values and not ok(values[key]):
            error_for(key)(msg)

    pos_int = lambda v: _is_int(v) and v > 0
    check("task", lambda v: v in TASKS, f"must be one of {', '.join(TASKS)}")
    check("d", lambda v: _is_int(v) and v >= 2, "must be an integer >= 2")
    check("seeds", lambda v: isinstance(v, list) and v and all(_is_int(s) and s >= 0 for s in v),
          "must be a nonempty list of nonnegative integers")
    check("output_dir", lambda v: isinstance(v, str) and v, "must be a nonempty path")
    for key in ("n_train", "n_val", "n_test", "probes", "regions", "trials", "m", "k", "k_graph"):
        check(key, pos_int, "must be a positive integer")
    check("expansion_factors", lambda v: isinstance(v, list) and v and all(_is_num(e) and e >= 1 for e in v),
          "must be a nonempty list of numbers >= 1")
    check("estimators", lambda v: isinstance(v, list) and v and all(e in ESTIMATORS for e in v),
          f"must be a nonempty list drawn from {', '.join(ESTIMATORS)}")
    check("kde_kernel", lambda v: v in ("vmf", "ambient-gaussian"), "must be vmf or ambient-gaussian")
    check("alpha", lambda v: _is_num(v) and v >= math.sqrt(2.0) - 1e-12, "must be a number >= sqrt(2)")
    check("eps_tilde", lambda v: v == "auto" or (_is_num(v) and v >= 0), "must be 'auto' or a number >= 0")
    check("mean_angle", lambda v: _is_num(v) and 0 < v < math.pi, "must lie in (0, pi)")
    check("family", lambda v: v in ("density", "mode"), "must be density or mode")
    check("n_grid", lambda v: isinstance(v, list) and len(v) >= 2 and all(pos_int(n) for n in v)
          and all(b > a for a, b in zip(v, v[1:])), "must be a strictly increasing list of >= 2 positive integers")
    check("trials", lambda v: _is_int(v) and v >= 3, "must be an integer >= 3")
    for key in ("save_models", "record_timings"):
        check(key, lambda v: isinstance(v, bool), "must be true or false")

    d = values.get("d")
    if "mixture" in values:
        _check_mixture(values["mixture"], d, error_for("mixture"))
        for key in ("kappas", "weights"):
            if key in values:
                error_for(key)("give either 'mixture' or 'kappas'/'weights', not both")
    elif "kappas" in values:
        kappas = values["kappas"]
        if not isinstance(kappas, list) or not kappas or not all(_is_num(v) and v > 0 for v in kappas):
            error_for("kappas")("must be a nonempty list of positive numbers")
        elif len(kappas) > 2:
            error_for("kappas")("random means support at most 2 components; give an explicit 'mixture'")
        weights = values.get("weights", [1.0] if isinstance(kappas, list) and len(kappas) == 1 else None)
        if weights is None:
            errors.append(f"{source}: missing required key 'weights'")
        elif not isinstance(weights, list) or not all(_is_num(w) and w > 0 for w in weights):
            error_for("weights")("must be a list of positive numbers")
        else:
            if isinstance(kappas, list) and len(weights) != len(kappas):
                error_for("weights")("needs one weight per kappa")
            if abs(sum(weights) - 1.0) > 1e-12:
                error_for("weights")(f"mixture weights must sum to 1 (got {sum(weights):.12g})")
    elif "weights" in values:
        error_for("weights")("requires 'kappas'")

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(**values)


def load_config(path, overrides=None):
    with open(path) as fh:
        return validate_config(fh.read(), source=str(path), overrides=overrides)
