"""Flat TOML configuration files for models and contracts.

A model file looks like::

    R_A = 1.0
    R_P = 1.0
    d = 2
    d0 = 0
    b = [1.0, 1.0]
    alpha = [1.0, 4.0]
    beta = [0.25, 0.25]
    seed = 7

``sigma`` is an optional row-major list of d*d numbers.  ``zero_cost = true``
switches the effort cost off (alpha and beta may then be omitted).
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .model import ContractControls, MarketModel, Preferences, QuadraticCost

INT_KEYS = ("d", "d0", "n_steps", "n_paths", "seed")
FLOAT_KEYS = ("R_A", "R_P", "rho", "T")
ARRAY_KEYS = ("b", "alpha", "beta", "sigma")
BOOL_KEYS = ("zero_cost",)
MODEL_KEYS = INT_KEYS + FLOAT_KEYS + ARRAY_KEYS + BOOL_KEYS
CONTRACT_KEYS = ("cash", "zX", "gammaX", "z1", "gamma1")

DEFAULTS = {"rho": 1.0, "d0": 0, "T": 1.0, "n_steps": 200, "n_paths": 10_000,
            "seed": 0, "zero_cost": False}


class ConfigError(ValueError):
    """Malformed configuration or contract file."""


@dataclass(frozen=True, eq=False)
class ModelConfig:
    preferences: Preferences
    market: MarketModel
    cost: QuadraticCost
    T: float = 1.0
    n_steps: int = 200
    n_paths: int = 10_000
    seed: int = 0


def _as_int(key, value):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    return value


def _as_float(key, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}")
    return float(value)


def _as_array(key, value):
    if not isinstance(value, list):
        raise ConfigError(f"{key} must be an array of numbers")
    return np.array([_as_float(key, x) for x in value], dtype=float)


def _load_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def parse_model(raw: dict) -> ModelConfig:
    unknown = sorted(set(raw) - set(MODEL_KEYS))
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")
    vals = dict(DEFAULTS)
    vals.update(raw)
    zero_cost = vals["zero_cost"]
    if not isinstance(zero_cost, bool):
        raise ConfigError("zero_cost must be true or false")
    required = ["R_A", "R_P", "d", "b"] + ([] if zero_cost else ["alpha", "beta"])
    missing = [k for k in required if k not in vals]
    if missing:
        raise ConfigError(f"missing keys: {', '.join(missing)}")

    ints = {k: _as_int(k, vals[k]) for k in INT_KEYS}
    floats = {k: _as_float(k, vals[k]) for k in FLOAT_KEYS}
    d = ints["d"]
    b = _as_array("b", vals["b"])
    sigma = _as_array("sigma", vals["sigma"]) if "sigma" in vals else None
    if sigma is not None:
        if sigma.size != d * d:
            raise ConfigError(f"sigma must have {d * d} entries (row-major)")
        sigma = sigma.reshape(d, d)
    if zero_cost:
        alpha = _as_array("alpha", vals.get("alpha", [0.0] * d))
        beta = _as_array("beta", vals.get("beta", [0.0] * d))
    else:
        alpha = _as_array("alpha", vals["alpha"])
        beta = _as_array("beta", vals["beta"])
    if ints["n_steps"] < 1 or ints["n_paths"] < 1:
        raise ConfigError("n_steps and n_paths must be at least 1")
    if not (math.isfinite(floats["T"]) and floats["T"] > 0):
        raise ConfigError("T must be positive")

    return ModelConfig(
        preferences=Preferences(floats["R_A"], floats["R_P"], floats["rho"]),
        market=MarketModel(d, b, sigma, ints["d0"]),
        cost=QuadraticCost(alpha, beta, zero_cost=zero_cost),
        T=floats["T"], n_steps=ints["n_steps"], n_paths=ints["n_paths"], seed=ints["seed"],
    )


def load_model(path) -> ModelConfig:
    return parse_model(_load_toml(path))


def parse_contract(raw: dict) -> ContractControls:
    unknown = sorted(set(raw) - set(CONTRACT_KEYS))
    if unknown:
        raise ConfigError(f"unknown contract keys: {', '.join(unknown)}")
    return ContractControls(**{k: _as_float(k, v) for k, v in raw.items()})


def load_contract(path) -> ContractControls:
    return parse_contract(_load_toml(path))


def dump_contract(controls: ContractControls) -> str:
    return "".join(f"{k} = {getattr(controls, k)!r}\n" for k in CONTRACT_KEYS)
