"""Run configuration: YAML schema, presets, validation, hashing.

The configuration is a nested mapping with sections ``model``, ``grid``,
``initial_state`` and ``solver``; keys carry their units (``*_per_day``,
``horizon_days``).  Presets provide complete defaults that a user config
overrides key by key.
"""

from __future__ import annotations

import copy
import hashlib
import json
import numpy as np
import yaml

from . import params as mp


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field."""


NY_NJ_PA_PRESET = {
    "model": {
        "num_regions": 3,
        "beta_base_per_day": 0.17,
        "residency_fraction": 0.9,
        "latency_rate_per_day": 1.0 / 5.0,
        "base_recovery_rate_per_day": 1.0 / 13.0,
        "death_rate_per_day": 0.0065 / 13.0,
        "policy_effectiveness": 0.99,
        "noise_s": 0.05,
        "noise_e": 0.03,
        "populations": [19.54e6, 8.91e6, 12.81e6],
        "productivity_per_day": 172.6,
        "death_weight": 100.0,
        "value_of_life": 1.96e6,
        "hospitalization_rate": 228.7e-5,
        "inpatient_cost_per_day": 73300.0 / 13.0,
        "health_grant_coeff": 1.0e6,
        "discount_rate_per_day": 0.0,
        "horizon_days": 180.0,
        "vaccine_threshold": 1.0,
        "vaccine_max_rate_per_day": 0.0,
        "recovery_boost_per_day": 0.0,
    },
    "grid": {"num_steps": 180},
    # 03/15/2020 start; the paper gives no initial condition, so this is a
    # documented configuration default.
    "initial_state": {
        "E": [2.0e-4, 2.0e-4, 2.0e-4],
        "I": [1.0e-4, 1.0e-4, 1.0e-4],
        "R": [0.0, 0.0, 0.0],
    },
    "solver": {
        "stages": 10,
        "iters_per_stage": 200,
        "batch_size": 64,
        "tau": 1.0,
        "learning_rate": 3e-4,
        "hidden": [32, 32, 32],
        "seed": 0,
        "tolerance": 1e-3,
        "paths": 256,
        "jitter": 0.1,
    },
}

PRESETS = {"ny-nj-pa": NY_NJ_PA_PRESET}

_REQUIRED_MODEL_KEYS = [
    "num_regions", "latency_rate_per_day", "base_recovery_rate_per_day",
    "death_rate_per_day", "policy_effectiveness", "noise_s", "noise_e",
    "populations", "productivity_per_day", "death_weight", "value_of_life",
    "hospitalization_rate", "inpatient_cost_per_day", "horizon_days",
]


def deep_merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path=None, preset: str | None = None,
                overrides: dict | None = None) -> dict:
    """Assemble the effective configuration: preset <- file <- overrides."""
    cfg: dict = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; available: {sorted(PRESETS)}")
        cfg = copy.deepcopy(PRESETS[preset])
    if path is not None:
        with open(path) as fh:
            loaded = yaml.safe_load(fh) or {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {path} must hold a mapping")
        cfg = deep_merge(cfg, loaded)
    if overrides:
        cfg = deep_merge(cfg, overrides)
    return cfg


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, default=float)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _require(section: dict, section_name: str, key: str):
    if key not in section:
        raise ConfigError(f"missing required field {section_name}.{key}")
    return section[key]


def game_params_from_config(cfg: dict) -> mp.GameParams:
    model = cfg.get("model")
    if not isinstance(model, dict):
        raise ConfigError("missing required section 'model'")
    for key in _REQUIRED_MODEL_KEYS:
        _require(model, "model", key)
    n = int(model["num_regions"])
    if "contact_matrix_per_day" in model:
        beta = np.asarray(model["contact_matrix_per_day"], dtype=float)
    elif "beta_base_per_day" in model:
        beta = mp.build_contact_matrix(float(model["beta_base_per_day"]),
                                       float(model.get("residency_fraction", 1.0)), n)
    else:
        raise ConfigError("model needs either contact_matrix_per_day or beta_base_per_day")
    try:
        return mp.GameParams(
            num_regions=n,
            contact_matrix=beta,
            latency_rate=float(model["latency_rate_per_day"]),
            base_recovery_rate=float(model["base_recovery_rate_per_day"]),
            death_rate=float(model["death_rate_per_day"]),
            policy_effectiveness=float(model["policy_effectiveness"]),
            noise_s=model["noise_s"],
            noise_e=model["noise_e"],
            populations=model["populations"],
            productivity=float(model["productivity_per_day"]),
            death_weight=float(model["death_weight"]),
            value_of_life=float(model["value_of_life"]),
            hospitalization_rate=float(model["hospitalization_rate"]),
            inpatient_cost=float(model["inpatient_cost_per_day"]),
            health_grant_coeff=float(model.get("health_grant_coeff", 1.0e6)),
            discount_rate=float(model.get("discount_rate_per_day", 0.0)),
            horizon=float(model["horizon_days"]),
            vaccine_threshold=float(model.get("vaccine_threshold", 1.0)),
            vaccine_max_rate=float(model.get("vaccine_max_rate_per_day", 0.0)),
            recovery_boost=float(model.get("recovery_boost_per_day", 0.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid model parameters: {exc}") from exc


def initial_state_from_config(cfg: dict, game: mp.GameParams) -> np.ndarray:
    """(N, 4) initial compartments; S defaults to the conserved remainder."""
    section = cfg.get("initial_state", {})
    n = game.num_regions

    def vec(key, default):
        raw = section.get(key)
        if raw is None:
            return np.full(n, default)
        arr = np.asarray(raw, dtype=float)
        if arr.ndim == 0:
            arr = np.full(n, float(arr))
        if arr.shape != (n,):
            raise ConfigError(f"initial_state.{key} must have length {n}")
        return arr

    e = vec("E", 0.0)
    i = vec("I", 0.0)
    r = vec("R", 0.0)
    if "S" in section:
        s = vec("S", 0.0)
    else:
        s = 1.0 - e - i - r
    state = np.stack([s, e, i, r], axis=1)
    if np.any(state < 0) or np.any(state > 1):
        raise ConfigError("initial_state compartments must lie in [0, 1]")
    if np.any(np.abs(state.sum(axis=1) - 1.0) > 1e-9):
        raise ConfigError("initial_state compartments must sum to 1 per region")
    return state


def solver_settings(cfg: dict) -> dict:
    sol = dict(NY_NJ_PA_PRESET["solver"])
    sol.update(cfg.get("solver", {}))
    grid = cfg.get("grid", {})
    sol["grid_steps"] = int(grid.get("num_steps", 180))
    return sol
