"""Experiment configuration: defaults, strict TOML loading and hashing."""

from __future__ import annotations

import copy
import difflib
import hashlib
import json

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

EXPERIMENTS = ("simulate", "uniqueness", "representation", "counterexample", "control", "smoothing-rates",
               "kolmogorov", "fbsde")

DEFAULTS = {
    "experiment": "simulate",
    "seed": 0,
    "workers": 1,
    "out": "results",
    "spectrum": {"family": "dirichlet-1d", "n_modes": 32, "alpha": 0.0, "rho": 1.0, "gamma": 0.0, "d": 1,
                 "frame": "mild"},
    "drift": {"kind": "wave-holder", "beta": 0.75, "cap": 5.0, "c1": 1.0, "offset": 0.0, "scale": 1.0,
              "value": 0.0},
    "approximant": {"kind": "exact", "index": 1000},
    "simulate": {"horizon": 1.0, "steps": 200, "paths": 100, "record_every": 20},
    "uniqueness": {"horizon": 1.0, "steps": 200, "paths": 1000, "separations": [1e-1, 1e-2, 1e-3, 1e-4],
                   "max_spread": 3.0},
    "representation": {"horizon": 1.0, "steps": 400, "paths": 20000, "x0": 0.3, "yosida": [1e3, 1e4],
                       "tolerance": 0.05},
    "counterexample": {"T": 1.0, "convention": "corrected", "n_xi": 255, "n_tau": 101, "tolerance": 1e-8},
    "kolmogorov": {"horizon": 1.0, "gamma": 8.0, "tol": 1e-10, "max_iter": 40, "time_nodes": 0,
                   "space_nodes": 0, "hermite_order": 0, "x0": 0.3, "mc_paths": 200000, "mc_steps": 400,
                   "max_ratio": 0.5},
    "fbsde": {"horizon": 1.0, "steps": 50, "paths": 100000, "basis": "local", "degree": 3, "nodes": 24,
              "x0": 0.3, "y_tolerance": 0.05, "z_tolerance": 0.10},
    "control": {"T": 1.0, "target_mode": 1, "k_max": 6, "steer_tolerance": 1e-6, "slope_tolerance": 0.1},
    "rates": {"t_min": 1e-3, "t_max": 1e-1, "points": 21, "min_r2": 0.95},
}

# experiment-specific starting points, applied before the user's file
PRESETS = {
    "kolmogorov": {"spectrum": {"family": "torus-d", "n_modes": 1},
                   "drift": {"kind": "heat-nonlocal", "cap": 1.0, "scale": 2.0}},
    "fbsde": {"spectrum": {"family": "torus-d", "n_modes": 1},
              "drift": {"kind": "heat-nonlocal", "cap": 1.0, "scale": 2.0},
              "approximant": {"kind": "yosida", "index": 1000}},
    "representation": {"spectrum": {"family": "torus-d", "n_modes": 1},
                       "drift": {"kind": "heat-nonlocal", "cap": 1.0, "scale": 2.0}},
    "control": {"spectrum": {"n_modes": 64}},
    "smoothing-rates": {"spectrum": {"n_modes": 1024}},
}


class ConfigError(ValueError):
    """Malformed or unknown configuration (exit code 2)."""


def _suggest(key, options):
    close = difflib.get_close_matches(key, list(options), n=3)
    return f"; did you mean {', '.join(repr(c) for c in close)}?" if close else ""


def _merge(base: dict, update: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in update.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown key {where!r}{_suggest(key, base)}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{where!r} must be a table")
            out[key] = _merge(base[key], val, where + ".")
        else:
            ref = base[key]
            if isinstance(ref, bool) != isinstance(val, bool) or (
                isinstance(ref, (int, float)) and not isinstance(val, (int, float))
            ) or (isinstance(ref, str) and not isinstance(val, str)) or (
                isinstance(ref, list) and not isinstance(val, list)
            ):
                raise ConfigError(f"{where!r} has type {type(val).__name__}, expected {type(ref).__name__}")
            out[key] = float(val) if isinstance(ref, float) and not isinstance(val, bool) else val
    return out


def resolve(user: dict | None = None, experiment: str | None = None) -> dict:
    """Defaults, then the experiment preset, then ``user``; unknown keys are errors."""
    user = user or {}
    kind = experiment or user.get("experiment", DEFAULTS["experiment"])
    if kind not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {kind!r}{_suggest(kind, EXPERIMENTS)}")
    cfg = _merge(DEFAULTS, PRESETS.get(kind, {}))
    cfg = _merge(cfg, user)
    cfg["experiment"] = kind
    return cfg


def load(path) -> dict:
    """Parse a TOML file; syntax errors carry the line and column."""
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
