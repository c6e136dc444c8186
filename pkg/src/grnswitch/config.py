"""Experiment configuration: JSON file, schema validation and layering.

Values are resolved in increasing precedence::

    built-in defaults < recipe defaults < config file < command-line flags

Within ``params`` a layer that sets ``mu`` (or ``eps``) replaces the other
one from lower layers; a single layer giving ``sigma``, ``eps`` and ``mu``
must satisfy ``eps = mu * sigma``.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from .errors import ConfigError, DomainError
from .model import ModelParams, OSCILLATION_PARAMS

__all__ = ["ExperimentConfig", "DEFAULTS", "load_config_file", "layer", "build_config", "config_hash", "schema"]

DEFAULTS: dict[str, Any] = {
    "params": {
        "gamma": OSCILLATION_PARAMS.gamma,
        "delta": OSCILLATION_PARAMS.delta,
        "xi_a": OSCILLATION_PARAMS.xi_a,
        "xi_b": OSCILLATION_PARAMS.xi_b,
        "sigma": OSCILLATION_PARAMS.sigma,
        "eps": OSCILLATION_PARAMS.eps,
    },
    "system": "full",
    "initial": [0.0, 0.0, 0.5, 0.5],
    "t_end": 1000.0,
    "tol": 1e-9,
    "path": {"center": [1.0, 2.0], "radius": 0.5, "n": 720},
    "grid": {"sigma": {"min": 1e-3, "max": 1e-1, "n": 25}, "eps": {"min": 1e-6, "max": 1e-1, "n": 25}},
    "hopf_curve": {"step": 1e-2, "max_step": 5e-2, "xi_a_max": 3.0, "xi_b_max": 6.0, "max_points": 2000},
    "pwl": {"p_b0": [1.1, 1.5, 2.0, 5.0], "t_max": 100.0, "max_events": 10000},
    "output": {"dir": ".", "format": "csv"},
    "threads": 1,
}

_REL_CONSISTENCY = 1e-12


def schema() -> dict:
    text = resources.files("grnswitch").joinpath("config_schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _validate(raw: dict, origin: str) -> None:
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for err in errors:
            where = "/".join(str(k) for k in err.absolute_path) or "<root>"
            lines.append(f"{origin}: {where}: {err.message}")
        raise ConfigError("\n".join(lines))


def load_config_file(path: str | Path) -> dict:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    _validate(raw, str(path))
    _check_rate_triple(raw.get("params", {}), str(path))
    return raw


def _check_rate_triple(params: dict, origin: str) -> None:
    if {"sigma", "eps", "mu"} <= params.keys():
        eps, derived = params["eps"], params["mu"] * params["sigma"]
        if abs(eps - derived) > _REL_CONSISTENCY * max(abs(eps), abs(derived), 1e-300):
            raise ConfigError(f"{origin}: params: eps={eps!r} is inconsistent with mu*sigma={derived!r}")


def layer(base: dict, overlay: dict) -> dict:
    """Deep merge of ``overlay`` onto ``base`` (neither is modified)."""
    out = copy.deepcopy(base)
    for key, value in overlay.items():
        if key == "params" and isinstance(value, dict):
            params = dict(out.get("params", {}))
            if "mu" in value and "eps" not in value:
                params.pop("eps", None)
            if "eps" in value and "mu" not in value:
                params.pop("mu", None)
            params.update(value)
            out["params"] = params
        elif isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = layer(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str | None
    params: ModelParams
    system: str
    initial: tuple[float, ...]
    t_end: float
    tol: float
    path: dict
    grid: dict
    hopf_curve: dict
    pwl: dict
    out_dir: Path
    fmt: str
    threads: int
    raw: dict

    @property
    def digest(self) -> str:
        return config_hash(self.raw)


def _params(raw: dict) -> ModelParams:
    q = dict(raw)
    _check_rate_triple(q, "config")
    mu = q.pop("mu", None)
    eps = q.pop("eps", None)
    try:
        if mu is not None and eps is None:
            return ModelParams.from_mu(q["gamma"], q["delta"], q["xi_a"], q["xi_b"], q["sigma"], mu)
        return ModelParams(q["gamma"], q["delta"], q["xi_a"], q["xi_b"], q["sigma"], eps if eps is not None else 0.0)
    except DomainError as exc:
        raise ConfigError(f"params: {exc}") from exc


def build_config(*layers: dict) -> ExperimentConfig:
    """Layer the given dicts over :data:`DEFAULTS`, validate and build."""
    raw = DEFAULTS
    for lay in layers:
        raw = layer(raw, lay)
    _validate(raw, "config")
    for axis in ("sigma", "eps"):
        a = raw["grid"][axis]
        if a["min"] > a["max"]:
            raise ConfigError(f"config: grid/{axis}: min exceeds max")
    return ExperimentConfig(
        experiment=raw.get("experiment"),
        params=_params(raw["params"]),
        system=raw["system"],
        initial=tuple(float(x) for x in raw["initial"]),
        t_end=float(raw["t_end"]),
        tol=float(raw["tol"]),
        path=raw["path"],
        grid=raw["grid"],
        hopf_curve=raw["hopf_curve"],
        pwl=raw["pwl"],
        out_dir=Path(raw["output"]["dir"]),
        fmt=raw["output"]["format"],
        threads=int(raw["threads"]),
        raw=raw,
    )


def config_hash(raw: dict) -> str:
    """sha256 of the canonical JSON form, ignoring output location and thread count."""
    material = {k: v for k, v in raw.items() if k not in ("output", "threads")}
    text = json.dumps(material, sort_keys=True, separators=(",", ":"), allow_nan=False,
                      default=lambda o: repr(o))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
