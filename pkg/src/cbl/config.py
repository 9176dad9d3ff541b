"""Experiment configuration: JSON schema, defaults and load-time validation."""

from __future__ import annotations

import copy
import hashlib
import json
import re
from pathlib import Path

import jsonschema

KINDS = (
    "verify-greens",
    "verify-jk",
    "verify-kernels",
    "linear-decay",
    "energy-audit",
    "nonlinear-run",
    "threshold-sweep",
)

_pos = {"type": "number", "exclusiveMinimum": 0}
_pos_list = {"type": "array", "items": _pos}

SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "cbl experiment configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": list(KINDS)},
        "n_y": {"type": "integer", "minimum": 2},
        "K": {"type": "integer", "minimum": 1},
        "mu": _pos_list,
        "nu": _pos_list,
        "k": {"type": "array", "items": {"type": "integer", "not": {"const": 0}}},
        "k_ref": {"type": "integer", "not": {"const": 0}},
        "nu_ref": _pos,
        "amplitudes": _pos_list,
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
        "tolerances": {"type": "object", "additionalProperties": {"type": "number"}},
        "policy": {"enum": ["frozen", "coevolving"]},
        "w_h4": {"type": "number", "minimum": 0},
        "w_amplitude": {"type": "number", "minimum": 0},
        "C0": _pos,
        "eps0": _pos,
        "eps1": _pos,
        "m": _pos,
        "scale": _pos,
        "horizon": _pos,
        "dt": _pos,
        "samples": {"type": "integer", "minimum": 2},
        "n_random": {"type": "integer", "minimum": 1},
        "kernel_n_y": {"type": "integer", "minimum": 2},
        "refinement": {"type": "array", "items": {"type": "integer", "minimum": 2}},
        "max_steps": {"type": "integer", "minimum": 1},
        "plot": {"type": "boolean"},
    },
}

# assertion tolerances per kind; overrides must use these names
TOLERANCES = {
    "verify-greens": {"roundtrip": 1e-6, "green_vs_direct": 1e-6, "identity": 1e-6},
    "verify-jk": {
        "norm_spread": 3.0, "norm_trend": 1.5, "commutator_spread": 4.0,
        "self_adjoint": 1e-6, "refinement_factor": 2.0,
    },
    "verify-kernels": {"slope_tol": 0.15, "h_slack": 1.5, "taylor": 1e-8},
    "linear-decay": {"nu_slope": 1 / 3, "nu_slope_tol": 0.05, "k_slope": 2 / 3, "k_slope_tol": 0.08},
    "energy-audit": {"monotone_slack": 1e-10},
    "nonlinear-run": {"growth_limit": 10.0, "rate_factor": 0.5},
    "threshold-sweep": {"growth_limit": 10.0},
}

DEFAULTS = {
    "verify-greens": {"n_y": 128, "k": [1, 4, 16], "n_random": 100, "seed": 0},
    "verify-jk": {"n_y": 256, "k": list(range(1, 33)), "refinement": [64, 128, 256], "seed": 0},
    "verify-kernels": {
        "n_y": 64, "kernel_n_y": 256, "k": [2, 4, 8, 16, 32, 64], "n_random": 10000,
        "seed": 0, "w_amplitude": 0.01,
    },
    "linear-decay": {
        "n_y": 128, "nu": [1e-2, 1e-3, 1e-4, 1e-5], "k": [1, 2, 4, 8], "k_ref": 1,
        "nu_ref": 1e-4, "policy": "frozen", "w_h4": 0.0, "samples": 400, "seed": 0,
    },
    "energy-audit": {
        "n_y": 128, "nu": [1e-2, 1e-3], "k": [1, 2, 8], "w_h4": 0.0099, "horizon": 6.0, "C0": 108.0,
        "n_random": 500, "seed": 0,
    },
    "nonlinear-run": {
        "n_y": 64, "K": 8, "mu": [1e-3], "nu": [1e-3], "eps0": 0.01, "eps1": 0.01, "m": 1.0,
        "scale": 1.0, "horizon": 2.0, "w_h4": 0.0, "seed": 0, "max_steps": 200000,
    },
    "threshold-sweep": {
        "n_y": 48, "K": 6, "mu": [1e-4, 3e-4, 1e-3, 3e-3, 1e-2],
        "amplitudes": [0.25, 0.5, 1, 2, 4, 8], "eps0": 0.01, "eps1": 0.01, "m": 1.0,
        "horizon": 2.0, "w_h4": 0.0, "seed": 0, "max_steps": 200000,
    },
}


class ConfigError(ValueError):
    """Invalid configuration; the message carries ``path:line:`` when known."""


def _line_of(text: str, key: str | None) -> int | None:
    if not text or key is None:
        return None
    m = re.search(r'"' + re.escape(str(key)) + r'"\s*:', text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _fail(path, text, key, msg):
    line = _line_of(text, key)
    where = f"{path}:{line}" if line else f"{path}"
    raise ConfigError(f"{where}: {msg}")


class _NonFinite(ValueError):
    pass


def _reject_constant(name):
    raise _NonFinite(name)


def load_config(kind: str, path: str | Path | None = None, text: str | None = None) -> dict:
    """Read, validate and resolve a configuration against the defaults for ``kind``."""
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    label = str(path) if path is not None else "<config>"
    if text is None:
        if path is None:
            text = "{}"
        else:
            try:
                text = Path(path).read_text()
            except OSError as exc:
                raise ConfigError(f"{label}: cannot read config: {exc}") from exc
    try:
        raw = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{label}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    except _NonFinite as exc:
        m = re.search(re.escape(str(exc)), text)
        line = text.count("\n", 0, m.start()) + 1 if m else 1
        raise ConfigError(f"{label}:{line}: non-finite number {exc} is not allowed") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{label}:1: config must be a JSON object")
    errors = sorted(jsonschema.Draft7Validator(SCHEMA).iter_errors(raw), key=lambda e: list(e.path))
    if errors:
        err = errors[0]
        key = err.path[0] if err.path else None
        if err.validator == "additionalProperties" and not err.path:
            extra = sorted(set(raw) - set(SCHEMA["properties"]))
            key = extra[0] if extra else None
            _fail(label, text, key, f"unknown key {key!r}")
        loc = "/".join(str(p) for p in err.path) or "(root)"
        _fail(label, text, key, f"{loc}: {err.message}")
    if "kind" in raw and raw["kind"] != kind:
        _fail(label, text, "kind", f"config kind {raw['kind']!r} does not match {kind!r}")
    cfg = copy.deepcopy(DEFAULTS[kind])
    cfg.update({k: v for k, v in raw.items() if k != "tolerances"})
    tol = dict(TOLERANCES[kind])
    for name, value in raw.get("tolerances", {}).items():
        if name not in tol:
            _fail(label, text, name, f"unknown tolerance {name!r} for {kind}")
        tol[name] = float(value)
    cfg["tolerances"] = tol
    cfg["kind"] = kind
    _check_guards(kind, cfg, label, text)
    return cfg


def _check_guards(kind, cfg, label, text):
    from .linear import resolution_floor

    n_y = cfg.get("n_y")
    if n_y is not None and n_y % 2:
        _fail(label, text, "n_y", f"n_y must be even, got {n_y}")
    if cfg.get("kernel_n_y", 2) % 2:
        _fail(label, text, "kernel_n_y", "kernel_n_y must be even")
    for r in cfg.get("refinement", []):
        if r % 2:
            _fail(label, text, "refinement", f"refinement grid {r} must be even")
    if kind in ("linear-decay", "energy-audit"):
        nus = list(cfg["nu"]) + ([cfg["nu_ref"]] if kind == "linear-decay" else [])
        if not nus or not cfg["k"]:
            _fail(label, text, "nu" if not nus else "k", "parameter grid is empty")
        for nu in nus:
            if n_y < resolution_floor(nu):
                _fail(label, text, "n_y",
                      f"n_y = {n_y} below the boundary-layer floor {resolution_floor(nu):.1f} "
                      f"for nu = {nu:g}")
    if kind in ("nonlinear-run", "threshold-sweep"):
        if not cfg["mu"]:
            _fail(label, text, "mu", "mu grid is empty")
        if kind == "threshold-sweep" and not cfg["amplitudes"]:
            _fail(label, text, "amplitudes", "amplitude grid is empty")
        if kind == "nonlinear-run" and len(cfg["nu"]) != len(cfg["mu"]):
            _fail(label, text, "nu", "mu and nu lists must have equal length")
        if cfg["K"] < 4:
            _fail(label, text, "K", "K must be at least 4 to hold the initial modes")
        for mu in cfg["mu"] + cfg.get("nu", []):
            if not mu < 1:
                _fail(label, text, "mu", f"viscosities must lie in (0, 1), got {mu}")
            if n_y < resolution_floor(mu):
                _fail(label, text, "n_y",
                      f"n_y = {n_y} below the boundary-layer floor {resolution_floor(mu):.1f}")
        from .experiments import nonlinear_guard

        try:
            nonlinear_guard(cfg)
        except ValueError as exc:
            _fail(label, text, "dt" if "dt" in cfg else "scale", str(exc))
    if kind in ("verify-jk", "verify-greens", "verify-kernels") and not cfg["k"]:
        _fail(label, text, "k", "wavenumber list is empty")


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()
