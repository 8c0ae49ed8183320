"""TOML run configuration with per-command defaults and flag overrides.

A config file has up to four sections (``dgp``, ``policy``, ``mc``,
``oracle``). Every key has a declared type; unknown keys and type errors are
reported with their dotted field name. Command-line flags are applied last
as ``{"section.key": value}`` overrides.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .effects import PolicySpec
from .errors import ConfigError
from .mc import DESK_REPS, FULL_REPS, DEFAULT_TAUS, McConfig
from .oracle import NormalLinearDgp

_REAL, _INT, _STR, _BOOL, _REALS, _STRS = "real", "integer", "string", "boolean", "reals", "strings"

SCHEMA = {
    "dgp": {"lam": _REAL, "gamma": _REAL, "mu_x": _REAL, "sigma_x": _REAL, "sigma_u": _REAL,
            "x_dist": _STR},
    "policy": {"ldot0": _REAL, "sdot0": _REAL, "mu": _REAL},
    "mc": {"n": _INT, "reps": _INT, "taus": _REALS, "links": _STRS, "seed": _INT,
           "gamma_grid": _REALS, "level": _REAL, "full": _BOOL, "tables": _STRS,
           "workers": _INT},
    "oracle": {"delta": _REAL, "nsim": _INT, "taus": _REALS, "n_quad": _INT, "seed": _INT},
}

POWER_GRID = tuple(round(k / 100, 2) for k in range(-40, 41))

PROFILES = {
    "simulate": {
        "policy": {"ldot0": 1.0, "sdot0": -1.0},
        "mc": {"links": ["probit", "logit"], "tables": ["bias"],
               "gamma_grid": [0.25, 0.5, 0.75, 1.0]},
    },
    "power": {
        "dgp": {"mu_x": 1.0},
        "policy": {"ldot0": 0.0, "sdot0": -1.0, "mu": 0.0},
        "mc": {"links": ["probit"], "gamma_grid": list(POWER_GRID)},
    },
    "normality": {
        "policy": {"ldot0": 1.0, "sdot0": -1.0},
        "mc": {"links": ["probit"], "gamma_grid": [0.25, 0.75]},
    },
    "oracle": {
        "policy": {"ldot0": 1.0, "sdot0": -1.0},
        "oracle": {"delta": 0.01, "nsim": 4_000_000, "n_quad": 64, "seed": 0},
    },
}

TABLES = ("bias", "coverage")


def _coerce(field: str, kind: str, value):
    def bad():
        return ConfigError(f"{field}: expected {kind}, got {value!r}")

    if kind == _REAL:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise bad()
        if not math.isfinite(value):
            raise bad()
        return float(value)
    if kind == _INT:
        if isinstance(value, bool) or not isinstance(value, int):
            raise bad()
        return value
    if kind == _STR:
        if not isinstance(value, str):
            raise bad()
        return value
    if kind == _BOOL:
        if not isinstance(value, bool):
            raise bad()
        return value
    if not isinstance(value, (list, tuple)):
        raise bad()
    inner = _REAL if kind == _REALS else _STR
    return [_coerce(f"{field}[{i}]", inner, v) for i, v in enumerate(value)]


def load_toml(path) -> dict:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def resolve(command: str, raw: dict | None = None, overrides: dict | None = None) -> dict:
    """Merge profile defaults, file contents and flag overrides into typed sections."""
    merged = {section: dict(values) for section, values in PROFILES.get(command, {}).items()}
    for section, values in (raw or {}).items():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        if not isinstance(values, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key, value in values.items():
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}")
            merged.setdefault(section, {})[key] = value
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        section, key = dotted.split(".", 1)
        merged.setdefault(section, {})[key] = value
    typed = {}
    for section, values in merged.items():
        typed[section] = {
            key: _coerce(f"{section}.{key}", SCHEMA[section][key], value)
            for key, value in values.items()
        }
    return typed


def build_dgp(cfg: dict) -> NormalLinearDgp:
    return NormalLinearDgp(**cfg.get("dgp", {}))


def build_policy(cfg: dict, dgp: NormalLinearDgp) -> PolicySpec:
    values = dict(cfg.get("policy", {}))
    values.setdefault("mu", dgp.mu_x)
    try:
        return PolicySpec(**values)
    except ValueError as exc:
        raise ConfigError(f"policy: {exc}") from None


def build_mc_config(cfg: dict, default_workers: int = 1) -> McConfig:
    dgp = build_dgp(cfg)
    mc = dict(cfg.get("mc", {}))
    full = mc.pop("full", False)
    mc.pop("tables", None)
    reps = mc.pop("reps", FULL_REPS if full else DESK_REPS)
    try:
        return McConfig(
            dgp=dgp,
            n=mc.pop("n", 1000),
            reps=reps,
            taus=tuple(mc.pop("taus", DEFAULT_TAUS)),
            links=tuple(mc.pop("links", ("probit",))),
            policy=build_policy(cfg, dgp),
            seed=mc.pop("seed", 0),
            gamma_grid=tuple(mc.pop("gamma_grid", ())),
            workers=mc.pop("workers", default_workers),
            level=mc.pop("level", 0.95),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"mc: {exc}") from None


def tables(cfg: dict) -> tuple[str, ...]:
    chosen = tuple(cfg.get("mc", {}).get("tables", ("bias",)))
    for t in chosen:
        if t not in TABLES:
            raise ConfigError(f"mc.tables: unknown table {t!r}; expected one of {TABLES}")
    return chosen


@dataclass(frozen=True)
class OracleSettings:
    dgp: NormalLinearDgp
    policy: PolicySpec
    taus: tuple[float, ...]
    delta: float
    nsim: int
    n_quad: int
    seed: int


def build_oracle_settings(cfg: dict) -> OracleSettings:
    dgp = build_dgp(cfg)
    o = cfg.get("oracle", {})
    return OracleSettings(
        dgp=dgp,
        policy=build_policy(cfg, dgp),
        taus=tuple(o.get("taus", DEFAULT_TAUS)),
        delta=o.get("delta", 0.01),
        nsim=o.get("nsim", 4_000_000),
        n_quad=o.get("n_quad", 64),
        seed=o.get("seed", 0),
    )
