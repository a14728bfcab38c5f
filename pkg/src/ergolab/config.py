"""Experiment configuration files (TOML).

Every table has a closed set of keys; anything else is a
:class:`~ergolab.errors.ConfigurationError` naming the offending key.
The schema is documented in ``docs/config.md``.
"""

from __future__ import annotations

import hashlib
import json
import sys

from .errors import ConfigurationError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

EXPERIMENTS = ("seminorm", "criterion", "rtt", "vdc", "extension", "generic")

_COMMON = {"experiment", "seed"}
_WEIGHT = {"system", "f1", "f2", "a1", "a2", "N", "horizon", "deltas", "schedule", "tol"}

SCHEMAS = {
    "seminorm": _COMMON | {"system", "observable", "level", "c", "H", "N", "M", "backend",
                           "blocks"},
    "criterion": _COMMON | _WEIGHT,
    "rtt": _COMMON | {"weight", "targets", "N", "tail_tol", "min_fraction"},
    "vdc": _COMMON | {"N", "H", "dim", "trials"},
    "extension": _COMMON | {"system", "f1", "f2", "a1", "a2", "N", "samples"},
    "generic": _COMMON | {"system", "g1", "g2", "a1", "a2", "N", "mc", "points", "tol"},
}
_NESTED = {
    ("rtt", "weight"): _WEIGHT,
    ("rtt", "targets"): {"name", "system", "g", "samples"},
}
REQUIRED = {
    "seminorm": {"system", "observable", "level"},
    "criterion": {"system", "f1", "f2", "a1", "a2", "N"},
    "rtt": {"weight", "targets", "N"},
    "vdc": {"N", "H"},
    "extension": {"system", "f1", "f2", "a1", "a2", "N", "samples"},
    "generic": {"system", "g1", "g2", "a1", "a2", "N", "mc"},
}

#: refusals without --force
CAPS = {
    "N": 10**6,
    "horizon": 10**5,
    "samples_times_N": 2 * 10**8,
    "mc_times_points": 10**7,
    "trials_times_N": 10**8,
}


def load(path):
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from None


def _unknown(keys, allowed, where):
    extra = sorted(set(keys) - set(allowed))
    if extra:
        raise ConfigurationError(f"unknown key {extra[0]!r} in {where}")


def validate(cfg, experiment):
    """Check keys against the schema of ``experiment``; returns ``cfg``."""
    if experiment not in SCHEMAS:
        raise ConfigurationError(f"unknown experiment {experiment!r}")
    declared = cfg.get("experiment", experiment)
    if declared != experiment:
        raise ConfigurationError(f"config is for {declared!r}, not {experiment!r}")
    _unknown(cfg, SCHEMAS[experiment], "config")
    missing = sorted(REQUIRED[experiment] - set(cfg))
    if missing:
        raise ConfigurationError(f"missing required key {missing[0]!r}")
    for (exp, key), allowed in _NESTED.items():
        if exp != experiment or key not in cfg:
            continue
        tables = cfg[key] if isinstance(cfg[key], list) else [cfg[key]]
        for i, t in enumerate(tables):
            if not isinstance(t, dict):
                raise ConfigurationError(f"{key} entries must be tables")
            _unknown(t, allowed, f"{key}[{i}]" if isinstance(cfg[key], list) else key)
    return cfg


def check_caps(cfg, experiment, force=False):
    if force:
        return
    def over(name, value):
        if value > CAPS[name]:
            raise ConfigurationError(
                f"{name}={value:.3g} exceeds the cost cap {CAPS[name]:.3g}; rerun with --force")
    N = int(cfg.get("N", 0))
    over("N", N)
    if experiment == "rtt":
        over("N", int(cfg["weight"].get("N", 0)))
        over("horizon", int(cfg["weight"].get("horizon", 0)))
    if "horizon" in cfg:
        over("horizon", int(cfg["horizon"]))
    if experiment == "extension":
        over("samples_times_N", int(cfg["samples"]) * N)
    if experiment == "generic":
        over("mc_times_points", int(cfg["mc"]) * int(cfg.get("points", 1)))
    if experiment == "vdc":
        over("trials_times_N", int(cfg.get("trials", 1)) * N)


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()
