"""Config-file loading and per-subcommand schemas.

Every scenario the command line can run is described by a flat TOML
table (plus an optional ``[noise]`` sub-table).  Parsing materializes
all defaults so the resolved mapping is self-contained; the manifest
written next to the outputs stores exactly this mapping, which is what
makes a manifest re-run reproducible without the original file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - Python < 3.11
    import tomli as tomllib

from spinbayes.errors import ConfigError

__all__ = ["SUBCOMMANDS", "parse_config", "resolve_options", "load_manifest_config"]

_REQUIRED = object()


def _as_int(value: Any, key: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"'{key}' must be an integer, got {value!r}")
    return value


def _as_float(value: Any, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{key}' must be a number, got {value!r}")
    return float(value)


def _as_bool(value: Any, key: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigError(f"'{key}' must be true or false, got {value!r}")
    return value


def _as_str(value: Any, key: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"'{key}' must be a string, got {value!r}")
    return value


def _as_float_list(value: Any, key: str) -> list[float]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"'{key}' must be a non-empty array of numbers")
    return [_as_float(v, key) for v in value]


@dataclass(frozen=True)
class _Key:
    default: Any
    coerce: Callable[[Any, str], Any]


_NOISE_KEYS = {
    "p_d": _Key(0.0, _as_float),
    "sigma_w": _Key(0.0, _as_float),
    "sigma_f": _Key(0.0, _as_float),
    "sigma_r": _Key(0.0, _as_float),
}

_SCHEMAS: dict[str, dict[str, _Key]] = {
    "phase": {
        "n_atoms": _Key(200, _as_int),
        "xi": _Key(0.15, _as_float),
        "contrast": _Key(1.0, _as_float),
        "true_phi": _Key(_REQUIRED, _as_float),
        "n_steps": _Key(50, _as_int),
        "trials": _Key(100, _as_int),
        "grid_nodes": _Key(4096, _as_int),
        "seed": _Key(None, _as_int),
    },
    "sweep": {
        "n_atoms": _Key(200, _as_int),
        "chi_t": _Key(None, _as_float),
        "kind": _Key(_REQUIRED, _as_str),
        "values": _Key(None, _as_float_list),
        "true_phi": _Key(0.3, _as_float),
        "n_steps": _Key(50, _as_int),
        "trials": _Key(20, _as_int),
        "grid_nodes": _Key(4096, _as_int),
        "seed": _Key(None, _as_int),
    },
    "gravimetry": {
        "n_atoms": _Key(6000, _as_int),
        "xi": _Key(None, _as_float),
        "chi_t": _Key(None, _as_float),
        "contrast": _Key(0.98, _as_float),
        "k_eff": _Key(1.61e7, _as_float),
        "T_max": _Key(455e-6, _as_float),
        "a": _Key(1.3, _as_float),
        "M_a": _Key(25, _as_int),
        "M": _Key(100, _as_int),
        "true_g": _Key(_REQUIRED, _as_float),
        "g_prior": _Key(0.0, _as_float),
        "reshaped": _Key(True, _as_bool),
        "zoom_width": _Key(12.0, _as_float),
        "grid_nodes": _Key(4096, _as_int),
        "trials": _Key(100, _as_int),
        "seed": _Key(None, _as_int),
    },
    "clock": {
        "n_atoms": _Key(30000, _as_int),
        "xi_db": _Key(-5.1, _as_float),
        "contrast": _Key(0.91, _as_float),
        "T_max": _Key(0.141, _as_float),
        "a": _Key(1.3, _as_float),
        "M_a": _Key(6, _as_int),
        "M": _Key(12, _as_int),
        "cycles": _Key(400, _as_int),
        "reshaped": _Key(True, _as_bool),
        "zoom_width": _Key(12.0, _as_float),
        "grid_nodes": _Key(4096, _as_int),
        "trials": _Key(20, _as_int),
        "seed": _Key(None, _as_int),
    },
    "fringe": {
        "n_atoms": _Key(6000, _as_int),
        "contrast": _Key(0.98, _as_float),
        "T": _Key(455e-6, _as_float),
        "n_points": _Key(100, _as_int),
        "shots": _Key(1, _as_int),
        "xis": _Key([1.0, 0.53, 0.15, 0.06], _as_float_list),
        "trials": _Key(50, _as_int),
        "seed": _Key(None, _as_int),
    },
    "noise-check": {
        "n": _Key(65536, _as_int),
        "tau0": _Key(1.0, _as_float),
        "strength": _Key(1.0, _as_float),
        "seed": _Key(None, _as_int),
    },
}

# noise-check synthesizes its own generators and takes no [noise] table
_NOISELESS = frozenset({"noise-check"})

SUBCOMMANDS = tuple(_SCHEMAS)


def _resolve_table(
    raw: dict[str, Any], keys: dict[str, _Key], subcommand: str, prefix: str = ""
) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for name, value in raw.items():
        if name not in keys:
            raise ConfigError(
                f"unknown key '{prefix}{name}' for subcommand '{subcommand}'"
            )
        if value is None and keys[name].default is None:
            # manifests serialize unset optionals as null
            out[name] = None
        else:
            out[name] = keys[name].coerce(value, prefix + name)
    for name, key in keys.items():
        if name in out:
            continue
        if key.default is _REQUIRED:
            raise ConfigError(
                f"'{prefix}{name}' is required for subcommand '{subcommand}'"
            )
        out[name] = key.default
    return out


def resolve_options(subcommand: str, raw: dict[str, Any]) -> dict[str, Any]:
    """Validate a raw mapping against the subcommand schema, inject defaults."""
    if subcommand not in _SCHEMAS:
        raise ConfigError(f"unknown subcommand '{subcommand}'")
    raw = dict(raw)
    noise_raw = raw.pop("noise", {})
    resolved = _resolve_table(raw, _SCHEMAS[subcommand], subcommand)
    if subcommand in _NOISELESS:
        if noise_raw:
            raise ConfigError(
                f"subcommand '{subcommand}' takes no [noise] table"
            )
    else:
        if not isinstance(noise_raw, dict):
            raise ConfigError("[noise] must be a table")
        resolved["noise"] = _resolve_table(
            noise_raw, _NOISE_KEYS, subcommand, prefix="noise."
        )
    if subcommand == "sweep" and resolved["kind"] not in ("alpha_error", "t_error"):
        raise ConfigError("'kind' must be 'alpha_error' or 't_error'")
    if subcommand == "gravimetry":
        if resolved["xi"] is not None and resolved["chi_t"] is not None:
            raise ConfigError("give 'xi' or 'chi_t', not both")
    return resolved


def load_manifest_config(path: Path, subcommand: str) -> dict[str, Any]:
    """Pull the resolved config back out of a previously written manifest."""
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"manifest {path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict) or "config" not in payload:
        raise ConfigError(f"manifest {path} has no 'config' entry")
    recorded = payload.get("subcommand")
    if recorded != subcommand:
        raise ConfigError(
            f"manifest was written by subcommand '{recorded}', not '{subcommand}'"
        )
    return resolve_options(subcommand, payload["config"])


def parse_config(path: str | Path, subcommand: str) -> dict[str, Any]:
    """Load a TOML config (or a manifest written by a previous run).

    Returns the fully resolved option mapping: unknown keys rejected,
    defaults injected, types checked.  Scenario-level constraints are
    enforced where the module config objects are built.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    if path.suffix == ".json":
        return load_manifest_config(path, subcommand)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error in {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise ConfigError(f"config file {path} is not UTF-8: {exc}") from exc
    return resolve_options(subcommand, raw)
