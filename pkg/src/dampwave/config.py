"""Experiment configuration: TOML schema, defaults and the experiment hash.

A config has top-level keys ``suite`` and ``seed`` and the sections
``[profile]``, ``[grid]``, ``[params]`` and ``[output]``.  ``[params]`` is
suite-specific.  Every default that can influence a number is written into
the resolved config, so a resolved copy reproduces a run on its own.
"""

from __future__ import annotations

import copy
import hashlib
import json
import re
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .norms import POWER_SEED

SUITES = ("coeffs", "resolvent-scan", "weight-scan", "theta-scan", "identity-tests", "decay-run",
          "profile-compare", "huygens", "mourre", "synthesis-check")


class ConfigError(ValueError):
    """Schema or syntax error; the message names the offending key or line."""


# A default is a value or a callable of the partially resolved config.
PROFILE_DEFAULTS = {"d": 3, "rho0": 1.0, "g_amp": 0.0, "w_amp": 0.0, "a_amp": 0.0, "bumps": []}
GRID_DEFAULTS = {"n": 1024, "r_max": 40.0, "ell_max": 0}
OUTPUT_DEFAULTS = {"dir": "", "plots": False}
ANGLE_KEYS = {"params.angle"}
BUMP_KEYS = {"component": str, "center": float, "width": float, "height": float}

_RHO1 = lambda c: c["profile"]["rho0"] / 2
_SAMPLES = {"r_min": 1e-3, "r_max_sample": 0.3, "count": 12, "fit_r_max": 0.1}
_DATA = {"data_radius": 1.0, "data_power": 6, "g_radius": 0.8, "g_power": 6, "g_scale": 1.0}
_TIME = {"t_max": 60.0, "t_count": 121, "dt": 0.01, "check_dt": True,
         "delta": lambda c: c["profile"]["d"] + 3.0, "rho1": _RHO1,
         "fit_start": lambda c: 8 * max(c["params"]["data_radius"], c["params"]["g_radius"]),
         "free_method": "stepper"}

PARAM_DEFAULTS: dict = {
    "coeffs": {"max_order": 2, "sample_count": 400},
    "resolvent-scan": {"n_values": lambda c: list(range(c["profile"]["d"] + 2)), "angles": ["elliptic"],
                       "kinds": ["resolvent", "difference"], "delta_offset": 0.6, "rho1": _RHO1, **_SAMPLES,
                       "policy_h": 0.1, "policy_kappa": 12.0, "policy_r_max_min": 120.0,
                       "policy_r_max_cap": 2.0e4},
    "weight-scan": {"s_values": [0.5, 1.0], "delta_shift": 0.5, **_SAMPLES},
    "theta-scan": {"sigma_values": [0, 1, 2], "rho": _RHO1, "angle": "elliptic", **_SAMPLES},
    "identity-tests": {"z_values": [[0.3, 0.2], [0.05, 0.1], [-0.2, 0.4]], "identity_tol": 1e-8,
                       "adjoint_n": 256, "adjoint_tol": 1e-12},
    "decay-run": {**_DATA, **_TIME},
    "profile-compare": {**_DATA, **_TIME},
    "huygens": {"n_values": [4096, 8192], "t": 3.0, "radius": 1.0, "data_power": 3, "tol": 1e-3,
                "min_ratio": 3.0},
    "mourre": {"angles": ["diagonal"], "radii": [0.05, 0.1, 0.2], "etas": [1 / 32, 1 / 64, 1 / 128],
               "kappa": 120.0, "h": 0.25, "margin_tol": 0.05, "wall": True, "hypotheses": True,
               "refinement_n": [512, 1024, 2048, 4096], "refinement_r_max": 40.0},
    "synthesis-check": {**_DATA, "mu_values": [0.25, 0.5], "t_values": [2.0, 5.0, 10.0], "tol": 0.02,
                        "tau_max": 40.0, "dt": 0.01},
}


def _type_name(v) -> str:
    return type(v).__name__


def _coerce(path: str, value, default):
    """Check ``value`` against the type of ``default``; ints are accepted for floats."""
    if path in ANGLE_KEYS:
        ok = isinstance(value, (str, int, float)) and not isinstance(value, bool)
    elif isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, list):
        ok = isinstance(value, list)
    else:
        ok = isinstance(value, type(default))
    if not ok:
        raise ConfigError(f"key '{path}': expected {_type_name(default)}, got {_type_name(value)}")
    return value


def _fill(section: str, given: dict, defaults: dict, resolved: dict) -> dict:
    if not isinstance(given, dict):
        raise ConfigError(f"key '{section}': expected a table")
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown key '{section}.{unknown[0]}' (allowed: {', '.join(sorted(defaults))})")
    out = {}
    resolved[section] = out
    for key, default in defaults.items():
        if key in given:
            ref = default(resolved) if callable(default) else default
            out[key] = _coerce(f"{section}.{key}", given[key], ref)
        else:
            out[key] = copy.deepcopy(default(resolved) if callable(default) else default)
    return out


def _check_bumps(bumps: list):
    for k, b in enumerate(bumps):
        if not isinstance(b, dict):
            raise ConfigError(f"key 'profile.bumps[{k}]': expected a table")
        unknown = sorted(set(b) - set(BUMP_KEYS))
        if unknown:
            raise ConfigError(f"unknown key 'profile.bumps[{k}].{unknown[0]}'")
        for key, typ in BUMP_KEYS.items():
            if key not in b:
                raise ConfigError(f"missing key 'profile.bumps[{k}].{key}'")
            b[key] = _coerce(f"profile.bumps[{k}].{key}", b[key], typ())


def resolve(raw: dict) -> dict:
    """Validate a parsed config and fill every default explicitly.

    Raises
    ------
    ConfigError
        Naming the offending key.
    """
    raw = copy.deepcopy(raw)
    unknown = sorted(set(raw) - {"suite", "seed", "profile", "grid", "params", "output"})
    if unknown:
        raise ConfigError(f"unknown key '{unknown[0]}'")
    if "suite" not in raw:
        raise ConfigError("missing key 'suite'")
    suite = raw["suite"]
    if suite not in SUITES:
        raise ConfigError(f"key 'suite': unknown suite {suite!r} (allowed: {', '.join(SUITES)})")
    out: dict = {"suite": suite, "seed": _coerce("seed", raw.get("seed", POWER_SEED), POWER_SEED)}
    _fill("profile", raw.get("profile", {}), PROFILE_DEFAULTS, out)
    _check_bumps(out["profile"]["bumps"])
    _fill("grid", raw.get("grid", {}), GRID_DEFAULTS, out)
    _fill("params", raw.get("params", {}), PARAM_DEFAULTS[suite], out)
    _fill("output", raw.get("output", {}), OUTPUT_DEFAULTS, out)
    params = out["params"]
    for key in ("angle", "angles"):
        if key in params:
            for a in params[key] if key == "angles" else [params[key]]:
                angle_value(a, f"params.{key}")
    return out


def _locate(text: str, key: str):
    """Line number of ``section.key`` in TOML text, or None."""
    parts = key.split("[")[0].split(".")
    section, leaf = (parts[0], parts[-1]) if len(parts) > 1 else ("", parts[0])
    current = ""
    for no, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[+\s*([\w.-]+)\s*\]+", line)
        if m:
            current = m.group(1).split(".")[0]
            continue
        if current == section and re.match(rf"\s*{re.escape(leaf)}\s*=", line):
            return no
    return None


def load(path) -> dict:
    """Parse and resolve a TOML config file."""
    with open(path, "rb") as fh:
        text = fh.read().decode()
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        return resolve(raw)
    except ConfigError as exc:
        m = re.search(r"key '([^']+)'", str(exc))
        line = _locate(text, m.group(1)) if m else None
        where = f"{path}:{line}" if line else str(path)
        raise ConfigError(f"{where}: {exc}") from None


def experiment_id(resolved: dict) -> str:
    """Hash of the resolved config without the ``[output]`` section."""
    body = {k: v for k, v in resolved.items() if k != "output"}
    blob = json.dumps(body, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def dumps(resolved: dict) -> str:
    """TOML text of a resolved config."""
    import tomli_w

    return tomli_w.dumps(resolved)


def angle_value(angle, key: str = "angle") -> float:
    """Ray angle from a name in ``RAY_ANGLES`` or a number."""
    from .scaling import RAY_ANGLES

    if isinstance(angle, str):
        if angle not in RAY_ANGLES:
            raise ConfigError(f"key '{key}': unknown ray {angle!r} (allowed: {', '.join(RAY_ANGLES)})")
        return float(RAY_ANGLES[angle])
    if isinstance(angle, bool) or not isinstance(angle, (int, float)):
        raise ConfigError(f"key '{key}': expected a ray name or a number")
    return float(angle)


def r_samples(params: dict) -> tuple:
    from .scaling import default_r_samples

    return tuple(default_r_samples(params["r_min"], params["r_max_sample"], params["count"]))
