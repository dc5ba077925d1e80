"""Run configuration: strict JSON, schema "v1", every field with a default.

A user file is deep-merged over ``DEFAULTS``.  Unknown keys and type
mismatches raise ConfigError; the fully expanded result is what runs and what
gets echoed next to the artifacts.
"""
import copy
import json
import os

from . import currents as cu
from . import endo
from . import trapping as tr
from .errors import AttractLabError, ConfigError

SCHEMA = "v1"

# line seed used by the curve-based commands: p, q lifts and chart cutoff radii
_LINE = {"p": [[1.0, 0.0], [0.0, 0.0], [0.03, 0.0]],
         "q": [[0.0, 0.0], [1.0, 0.0], [0.0, -0.02]],
         "r_in": 2.0, "r_out": 3.0}

DEFAULTS = {
    "schema": SCHEMA,
    "family": {"family": "LIN", "k": 2, "d": 2, "coefficients": {},
               "epsilon": [[0.02, 0.0]], "rho": 0.2, "eps_bound": 1.0},
    "region": {"variant": "gauge", "rho": 0.2, "split": 1, "balls": None},
    "pipeline": {
        "workers": None,
        "fingerprint_basis": cu.FP_VERSION,
        "green": {"n": 40, "points": 1000, "line": None,
                  "grid": {"kind": "polar", "tmax": 8.0, "nt": 161, "ntheta": 64}},
        "attract": {"N": 30, "seeds": [_LINE], "basin_steps": 10},
        "measure": {"N": 10, "line": _LINE,
                    "grid": {"kind": "polar", "tmax": 6.0, "nt": 99, "ntheta": 101}},
        "census": {"seeds": 8, "N": 30, "tol": 0.05, "kind": None},
        "n0": {"N": 32, "max_period": 12, "tol": 1e-3, "seed": None},
        "lyap": {"n": 30, "samples": 400, "measure_N": 10},
        "entropy": {"n": 10, "eps": [0.05, 0.1], "budget": 200000},
        "speedcheck": {"contraction_rho": 0.05, "contraction_samples": 100000,
                       "dloc_rho": 0.1, "dloc_n": 5, "dloc_samples": 20000,
                       "topdeg_n": 4, "topdeg_points": [[[1.0, 0.0], [0.7, 0.0], [1e-4, 0.0]]]},
        "trap": {"samples": 2000, "rU_samples": 1000},
        "dim": {"mass_threshold": 0.05, "mu_threshold": 0.01, "mu_count": 4000, "lines": 3},
        "grow": {"r": None, "tol": 0.02, "seeds": 16, "draws": 8, "max_rounds": 40},
        "scan": {"center": [0.0, 0.0], "re_max": 0.03, "im_max": 0.03, "n_re": 21, "n_im": 21,
                 "nu_N": 10, "lyap_n": 30, "lyap_samples": 200, "census_seeds": 4,
                 "census_N": 10, "census_tol": 0.05, "trap_samples": 1000,
                 "render": "L2", "psh_radius": 2.0, "psh_tol_se": 3.0},
        "verify": {"profile": "full", "criteria": None},
    },
    "seeds": {"master": 0},
    "output": {"directory": "attractlab-out", "formats": ["csv", "json", "heatmap"]},
}

# subtrees replaced wholesale instead of merged key by key
OPAQUE = {("family", "coefficients"), ("family", "epsilon"), ("region", "balls"),
          ("pipeline", "green", "line"), ("pipeline", "n0", "seed")}

FORMATS = {"csv", "json", "heatmap", "ppm"}


def _check_type(path, default, value):
    if default is None or value is None:
        return
    name = ".".join(path)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{name}: expected a boolean")
    elif isinstance(default, (int, float)):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{name}: expected a number")
        if isinstance(default, int) and not isinstance(value, int):
            raise ConfigError(f"{name}: expected an integer")
    elif isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{name}: expected a string")
    elif isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{name}: expected a list")
    elif isinstance(default, dict):
        if not isinstance(value, dict):
            raise ConfigError(f"{name}: expected an object")


def merge(default, user, path=()):
    """Deep merge of ``user`` over ``default`` rejecting unknown keys."""
    out = copy.deepcopy(default)
    for key, value in user.items():
        sub = path + (key,)
        if key not in default:
            raise ConfigError(f"unknown config key {'.'.join(sub)}")
        if sub not in OPAQUE:
            _check_type(sub, default[key], value)
        if isinstance(default[key], dict) and sub not in OPAQUE:
            out[key] = merge(default[key], value, sub)
        else:
            out[key] = copy.deepcopy(value)
    return out


def set_path(doc, dotted, value):
    """Apply one ``a.b.c=value`` override (value parsed as JSON, else kept as a string)."""
    try:
        parsed = json.loads(value)
    except json.JSONDecodeError:
        parsed = value
    keys = dotted.split(".")
    node = doc
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {dotted}: {k} is not an object")
    node[keys[-1]] = parsed


def resolve(user=None, overrides=()):
    """Expanded configuration from a user document and ``key=value`` overrides."""
    user = copy.deepcopy(user or {})
    if not isinstance(user, dict):
        raise ConfigError("config must be a JSON object")
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, value = item.split("=", 1)
        set_path(user, key.strip(), value.strip())
    schema = user.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise ConfigError(f"unsupported config schema {schema!r}")
    cfg = merge(DEFAULTS, user)
    validate(cfg)
    if cfg["pipeline"]["workers"] is None:
        cfg["pipeline"]["workers"] = os.cpu_count() or 1
    return cfg


def load(path, overrides=()):
    if not os.path.isfile(path):
        raise ConfigError(f"config file {path} not found")
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return resolve(doc, overrides)


def validate(cfg):
    """Cross-field checks that the type pass cannot express."""
    p = cfg["pipeline"]
    if p["fingerprint_basis"] != cu.FP_VERSION:
        raise ConfigError(f"fingerprint basis {p['fingerprint_basis']!r} is pinned; "
                          f"this build provides {cu.FP_VERSION!r}")
    bad = set(cfg["output"]["formats"]) - FORMATS
    if bad:
        raise ConfigError(f"unknown output formats {sorted(bad)}")
    if p["verify"]["profile"] not in ("full", "quick"):
        raise ConfigError("pipeline.verify.profile must be 'full' or 'quick'")
    if p["workers"] is not None and p["workers"] < 1:
        raise ConfigError("pipeline.workers must be positive")
    try:
        family(cfg)
        region(cfg)
    except AttractLabError as exc:
        raise ConfigError(str(exc)) from exc


def family(cfg):
    doc = {k: v for k, v in cfg["family"].items()}
    return endo.family_from_json(doc)


def region(cfg):
    doc = {k: v for k, v in cfg["region"].items() if v is not None}
    if doc.get("variant") == "balls":
        doc.pop("rho", None)
        doc.pop("split", None)
    return tr.region_from_json(doc)


def vec(raw):
    """Complex vector from a list of [re, im] pairs or plain numbers."""
    return [complex(*c) if isinstance(c, (list, tuple)) else complex(c) for c in raw]
