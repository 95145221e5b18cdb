"""Experiment configuration: YAML or JSON file, then ``--set`` overrides.

Every field is validated before any computation. Errors name the offending
field by its dotted path, e.g. ``physics.d: must be > 0``.
"""

from __future__ import annotations

import copy
import json
import math
import re
from pathlib import Path

import yaml

EXPERIMENTS = ("norms", "spectrum", "rates", "markov-check", "km-compare")
MODELS = ("kernel", "km", "both")

DEFAULTS = {
    "experiment": None,
    "lattice": {"dims": [2, 2, 2], "dipole_dir": [0.0, 0.0, 1.0], "planar": False},
    "physics": {"lambda_a": 9.0, "gamma": 1.0, "d": 20.0},
    "model": "km",
    "sweep": None,
    "output_dir": "out",
    "seed": 0,
    "jobs": 1,
    "norms": {"corner_only": True, "include_diagonal": False, "kernel_cap": 12**3},
    "spectrum": {"n_bins": 41, "export_matrix": False},
    "rates": {"max_n": 11**3},
    "markov": {"t_end": 0.05, "dt": None, "scheme_order": 2, "initial": None,
               "time_dependent": True},
    "compare": {"x_values": [0.001, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 13.962634015954636,
                             20.0, 50.0, 100.0],
                "theta_deg": [0.0, 30.0, 54.735610317245346, 90.0]},
    "quadrature": {"rel_tol": 1e-8, "u_max_factor": 50.0, "singularity_pad": 1e-3,
                   "averaging_passes": 6},
}

DEFAULT_SWEEPS = {
    "norms": list(range(2, 21)),
    "spectrum": [3, 5, 7, 10],
    "rates": list(range(2, 11)),
}


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e-9`` (no decimal point) as a float."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
                   |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
                   |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
                   |[-+]?\.(?:inf|Inf|INF)
                   |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."))


class ConfigError(ValueError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


def parse_sweep(value, path="sweep"):
    """Side lengths from a list, ``"2..20"`` (inclusive) or ``"2,3,5"``."""
    if value is None:
        return None
    if isinstance(value, str):
        text = value.strip()
        m = re.fullmatch(r"(\d+)\s*\.\.\s*(\d+)", text)
        if m:
            lo, hi = int(m.group(1)), int(m.group(2))
            return list(range(lo, hi + 1))
        try:
            return [int(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(path, f"cannot parse side lengths from {value!r}") from None
    if isinstance(value, (list, tuple)):
        out = []
        for i, v in enumerate(value):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
                raise ConfigError(f"{path}[{i}]", f"side length must be an integer, got {v!r}")
            out.append(int(v))
        return out
    raise ConfigError(path, f"expected a list or range string, got {value!r}")


def _merge(base, update, path=""):
    for key, value in update.items():
        here = f"{path}{key}"
        if key not in base:
            raise ConfigError(here, "unknown field")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(here, "expected a mapping")
            _merge(base[key], value, here + ".")
        else:
            base[key] = value
    return base


def _parse_scalar(text):
    try:
        return yaml.load(text, Loader=_Loader)
    except yaml.YAMLError:
        return text


def apply_override(config, assignment):
    """Apply one ``dotted.path=value`` override (value parsed as YAML)."""
    if "=" not in assignment:
        raise ConfigError(assignment, "override must look like key.path=value")
    key, raw = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = config
    for i, part in enumerate(parts[:-1]):
        if not isinstance(node.get(part), dict):
            raise ConfigError(".".join(parts[:i + 1]), "unknown section")
        node = node[part]
    if parts[-1] not in node:
        raise ConfigError(key.strip(), "unknown field")
    node[parts[-1]] = _parse_scalar(raw)
    return config


def load_file(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc}") from None
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.load(text, Loader=_Loader)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(str(path), f"cannot parse config: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(str(path), "top level must be a mapping")
    return data


def _positive(cfg, section, key, integer=False, allow_none=False):
    v = cfg[section][key] if section else cfg[key]
    path = f"{section}.{key}" if section else key
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(path, f"expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if v <= 0:
        raise ConfigError(path, f"must be > 0, got {v!r}")
    return int(v) if integer else float(v)


def _bool(cfg, section, key):
    v = cfg[section][key]
    if not isinstance(v, bool):
        raise ConfigError(f"{section}.{key}", f"expected true/false, got {v!r}")
    return v


def _vector(cfg, section, key, length=None):
    v = cfg[section][key]
    path = f"{section}.{key}"
    if not isinstance(v, (list, tuple)) or (length and len(v) != length):
        raise ConfigError(path, f"expected a list{f' of {length} numbers' if length else ''}")
    out = []
    for i, item in enumerate(v):
        if isinstance(item, bool) or not isinstance(item, (int, float)) or not math.isfinite(item):
            raise ConfigError(f"{path}[{i}]", f"expected a number, got {item!r}")
        out.append(float(item))
    return out


def resolve(file_data=None, overrides=(), experiment=None):
    """Merge defaults, file contents and overrides; validate; return a plain dict."""
    cfg = copy.deepcopy(DEFAULTS)
    if file_data:
        _merge(cfg, file_data)
    for item in overrides:
        apply_override(cfg, item)
    if experiment is not None:
        if cfg["experiment"] not in (None, experiment):
            raise ConfigError("experiment", f"config says {cfg['experiment']!r} but "
                                            f"the command is {experiment!r}")
        cfg["experiment"] = experiment
    return validate(cfg)


def validate(cfg):
    exp = cfg["experiment"]
    if exp not in EXPERIMENTS:
        raise ConfigError("experiment", f"expected one of {', '.join(EXPERIMENTS)}, got {exp!r}")
    if cfg["model"] not in MODELS:
        raise ConfigError("model", f"expected one of {', '.join(MODELS)}, got {cfg['model']!r}")

    lat = cfg["lattice"]
    dims = lat["dims"]
    if not isinstance(dims, (list, tuple)) or len(dims) != 3:
        raise ConfigError("lattice.dims", "expected three extents")
    for i, n in enumerate(dims):
        if isinstance(n, bool) or not isinstance(n, (int, float)) or int(n) != n or n < 1:
            raise ConfigError(f"lattice.dims[{i}]", f"extent must be an integer >= 1, got {n!r}")
    lat["dims"] = [int(n) for n in dims]
    lat["dipole_dir"] = _vector(cfg, "lattice", "dipole_dir", 3)
    if not any(lat["dipole_dir"]):
        raise ConfigError("lattice.dipole_dir", "must be nonzero")
    _bool(cfg, "lattice", "planar")

    phys = cfg["physics"]
    for key in ("lambda_a", "gamma", "d"):
        phys[key] = _positive(cfg, "physics", key)

    sweep = parse_sweep(cfg["sweep"]) if cfg["sweep"] is not None else None
    if exp in DEFAULT_SWEEPS:
        if sweep is None:
            sweep = list(DEFAULT_SWEEPS[exp])
        if not sweep:
            raise ConfigError("sweep", "empty sweep")
        for i, s in enumerate(sweep):
            if s < 2:
                raise ConfigError(f"sweep[{i}]", f"side length must be >= 2, got {s}")
        if any(b <= a for a, b in zip(sweep, sweep[1:])):
            raise ConfigError("sweep", "side lengths must be strictly ascending")
    cfg["sweep"] = sweep

    if not isinstance(cfg["output_dir"], str) or not cfg["output_dir"]:
        raise ConfigError("output_dir", "expected a path")
    if isinstance(cfg["seed"], bool) or not isinstance(cfg["seed"], int):
        raise ConfigError("seed", f"expected an integer, got {cfg['seed']!r}")
    cfg["jobs"] = _positive(cfg, None, "jobs", integer=True)

    _bool(cfg, "norms", "corner_only")
    _bool(cfg, "norms", "include_diagonal")
    cfg["norms"]["kernel_cap"] = _positive(cfg, "norms", "kernel_cap", integer=True)
    cfg["spectrum"]["n_bins"] = _positive(cfg, "spectrum", "n_bins", integer=True)
    _bool(cfg, "spectrum", "export_matrix")
    cfg["rates"]["max_n"] = _positive(cfg, "rates", "max_n", integer=True)

    mk = cfg["markov"]
    mk["t_end"] = _positive(cfg, "markov", "t_end")
    mk["dt"] = _positive(cfg, "markov", "dt", allow_none=True)
    if mk["scheme_order"] not in (1, 2):
        raise ConfigError("markov.scheme_order", f"expected 1 or 2, got {mk['scheme_order']!r}")
    _bool(cfg, "markov", "time_dependent")
    if mk["initial"] is not None:
        mk["initial"] = _vector(cfg, "markov", "initial")
    if exp == "markov-check":
        n = lat["dims"][0] * lat["dims"][1] * lat["dims"][2]
        if n > 4:
            raise ConfigError("lattice.dims", f"markov-check supports N <= 4, got N={n}")
        if mk["initial"] is not None and len(mk["initial"]) != n:
            raise ConfigError("markov.initial", f"expected {n} amplitudes")
        if mk["initial"] is not None and not any(mk["initial"]):
            raise ConfigError("markov.initial", "must be nonzero")

    cmp_ = cfg["compare"]
    cmp_["x_values"] = _vector(cfg, "compare", "x_values")
    cmp_["theta_deg"] = _vector(cfg, "compare", "theta_deg")
    if not cmp_["x_values"] or min(cmp_["x_values"]) <= 0:
        raise ConfigError("compare.x_values", "need at least one value, all > 0")
    if not cmp_["theta_deg"]:
        raise ConfigError("compare.theta_deg", "need at least one angle")

    quad = cfg["quadrature"]
    quad["rel_tol"] = _positive(cfg, "quadrature", "rel_tol")
    if quad["rel_tol"] >= 1e-3:
        raise ConfigError("quadrature.rel_tol", "must be < 1e-3")
    quad["u_max_factor"] = _positive(cfg, "quadrature", "u_max_factor")
    quad["singularity_pad"] = _positive(cfg, "quadrature", "singularity_pad")
    quad["averaging_passes"] = _positive(cfg, "quadrature", "averaging_passes", integer=True)
    return cfg
