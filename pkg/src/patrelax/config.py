"""JSON run configuration: defaults, strict key checking, conversion to ExperimentConfig."""
from __future__ import annotations

import copy
import json
from pathlib import Path

from .errors import ConfigError, PatError
from .experiment import FORWARD_NORM, ExperimentConfig, NoiseSpec
from .filters import FilterSpec
from .forward import DetectorGeometry
from .image import ImageGrid
from .solver import SolverConfig

FIDELITY_NAMES = ("l2", "delta", "gauss", "bandpass")

DEFAULTS = {
    "grid": {"n": 128, "half_width": 1.0},
    "detectors": {"count": 64, "radius": 1.2},
    "time": {"samples": 357},
    "speed_c": 1.0,
    "forward_norm": FORWARD_NORM,
    "filters": {
        "system": {"kind": "gauss", "f_center": 0.20, "f_sigma": 0.08},
        "gauss": {"kind": "gauss", "f_center": 0.20, "f_sigma": 0.05},
        "bandpass": {"kind": "bandpass", "f_lo": 0.08, "f_hi": 0.35},
    },
    "noise": {"factor": 2.0, "mean_mode": "abs", "seed": 0},
    "solver": {
        "iterations": 5000,
        "alpha": 6e-6,
        "theta": 1.0,
        "norm_power_iters": 100,
        "norm_tol": 1e-6,
        "trace_every": 10,
    },
    "fidelities": ["l2", "gauss", "bandpass"],
    "out_dir": None,
}

_FILTER_KEYS = {"kind", "f_center", "f_sigma", "f_lo", "f_hi"}


def _merge(defaults: dict, given: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        path = f"{prefix}{key}"
        if key not in defaults:
            raise ConfigError(path, "unknown key")
        if isinstance(defaults[key], dict) and key != "filters":
            if not isinstance(value, dict):
                raise ConfigError(path, "expected an object")
            out[key] = _merge(defaults[key], value, path + ".")
        elif key == "filters":
            if not isinstance(value, dict):
                raise ConfigError(path, "expected an object")
            for name, spec in value.items():
                if name not in defaults["filters"]:
                    raise ConfigError(f"{path}.{name}", "unknown filter")
                if not isinstance(spec, dict):
                    raise ConfigError(f"{path}.{name}", "expected an object")
                bad = set(spec) - _FILTER_KEYS
                if bad:
                    raise ConfigError(f"{path}.{name}.{sorted(bad)[0]}", "unknown key")
                out["filters"][name] = dict(spec)
        else:
            out[key] = value
    return out


def _number(cfg, section, key, kind=float):
    value = cfg[section][key] if key is not None else cfg[section]
    path = section if key is None else f"{section}.{key}"
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if kind is int:
        if int(value) != value:
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return int(value)
    return float(value)


def filter_spec(cfg, name) -> FilterSpec:
    try:
        return FilterSpec(**cfg["filters"][name])
    except (PatError, TypeError) as exc:
        raise ConfigError(f"filters.{name}", str(exc)) from exc


def resolve(raw: dict | None = None, seed: int | None = None) -> dict:
    """Defaults merged with ``raw``; ``seed`` overrides ``noise.seed``."""
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError("<root>", "configuration must be a JSON object")
    cfg = _merge(DEFAULTS, raw or {})
    if seed is not None:
        cfg["noise"]["seed"] = int(seed)
    return cfg


def load(path=None, seed: int | None = None) -> dict:
    if path is None:
        return resolve(None, seed)
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from exc
    return resolve(raw, seed)


def to_experiment(cfg: dict, workers: int = 1) -> ExperimentConfig:
    """Build and validate an ExperimentConfig; errors name the offending key."""
    def attempt(path, fn):
        try:
            return fn()
        except ConfigError:
            raise
        except (PatError, TypeError, ValueError) as exc:
            raise ConfigError(path, str(exc)) from exc

    grid = attempt("grid", lambda: ImageGrid(_number(cfg, "grid", "n", int),
                                             _number(cfg, "grid", "half_width")))
    geom = attempt("detectors", lambda: DetectorGeometry(_number(cfg, "detectors", "count", int),
                                                         _number(cfg, "detectors", "radius")))
    attempt("detectors.radius", lambda: geom.check_outside(grid))
    samples = _number(cfg, "time", "samples", int)
    if samples < 3:
        raise ConfigError("time.samples", "need at least 3 samples")
    speed = _number(cfg, "speed_c", None)
    if not speed > 0:
        raise ConfigError("speed_c", "must be positive")
    fnorm = cfg["forward_norm"]
    if fnorm is not None:
        fnorm = _number(cfg, "forward_norm", None)
        if not fnorm > 0:
            raise ConfigError("forward_norm", "must be positive or null")

    seed = cfg["noise"]["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("noise.seed", "expected a 64-bit unsigned integer")
    solver = attempt("solver", lambda: SolverConfig(
        iterations=_number(cfg, "solver", "iterations", int),
        alpha=_number(cfg, "solver", "alpha"),
        theta=_number(cfg, "solver", "theta"),
        norm_power_iters=_number(cfg, "solver", "norm_power_iters", int),
        norm_tol=_number(cfg, "solver", "norm_tol"),
        trace_every=_number(cfg, "solver", "trace_every", int),
        seed=seed,
    ))
    noise = attempt("noise", lambda: NoiseSpec(_number(cfg, "noise", "factor"), seed,
                                               cfg["noise"]["mean_mode"]))

    fids = cfg["fidelities"]
    if not isinstance(fids, list) or not fids:
        raise ConfigError("fidelities", "expected a non-empty list")
    fidelities = {}
    for i, name in enumerate(fids):
        if name not in FIDELITY_NAMES:
            raise ConfigError(f"fidelities[{i}]", f"unknown fidelity {name!r}")
        if name == "l2":
            fidelities[name] = "l2"
        elif name == "delta":
            fidelities[name] = FilterSpec.delta()
        else:
            fidelities[name] = filter_spec(cfg, name)
    out_dir = cfg["out_dir"]
    if out_dir is not None and not isinstance(out_dir, str):
        raise ConfigError("out_dir", "expected a string or null")

    return ExperimentConfig(
        grid=grid,
        geometry=geom,
        samples=samples,
        speed_c=speed,
        forward_norm=fnorm,
        system_psf=filter_spec(cfg, "system"),
        fidelities=fidelities,
        solver=solver,
        noise=noise,
        out_dir=out_dir,
        workers=workers,
    )
