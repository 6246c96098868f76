"""Experiment configuration: JSON schema, presets and resolution.

A configuration is a plain JSON object selecting one of the bundled
systems and optionally overriding physics, requirement bounds, initial
ranges, network shapes and optimization knobs.  Unknown keys are
rejected everywhere.  ``resolve_config`` fills defaults, builds the
model, requirement set, sampler and network specs, and computes a
content hash of the fully-merged configuration that output files embed
so weights can be matched to the run that produced them.

Reproducibility: every random stream is derived from the root seed and
a fixed purpose label, so adding or removing one consumer never shifts
the draws of another.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass

import jsonschema
import numpy as np

from .autodiff import FLOAT_OPS
from .policy import MlpSpec, SharedDefender, attacker_spec, defender_spec
from .sim import SystemModel
from .stl import RequirementSet, formula_from_dict
from .train import TrainConfig, policy_factory
from .systems.cartpole import (CartPoleParams, build_cartpole,
                               cartpole_initial_sampler,
                               cartpole_requirements)
from .systems.platoon import (EfficiencyParams, PlatoonParams, VehicleParams,
                              _energy_rebase, build_platoon_basic,
                              build_platoon_energy, platoon_initial_sampler,
                              platoon_requirements)

__all__ = [
    "ConfigError",
    "SCHEMA",
    "PRESETS",
    "ResolvedConfig",
    "load_config",
    "preset_config",
    "validate_config",
    "resolve_config",
    "config_hash",
    "subseed",
    "derive_rng",
    "derive_seedseq",
]


class ConfigError(ValueError):
    """Configuration file is malformed or inconsistent."""


# ---------------------------------------------------------------------------
# Schema

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_PAIR = {"type": "array", "items": {"type": "number"},
         "minItems": 2, "maxItems": 2}
_COUNT = {"type": "integer", "minimum": 0}
_FRACTION = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}
_HIDDEN = {"type": "array", "items": {"type": "integer", "minimum": 1},
           "minItems": 1}
_INTEGRATOR = {"enum": ["semi_implicit", "explicit"]}

_CARTPOLE_PARAMS = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "cart_mass": _POS,
        "pole_mass": _POS,
        "pole_length": _POS,
        "gravity": _POS,
        "force_limit": _POS,
        "friction_range": _PAIR,
        "target_rate_limit": _POS,
        "dt": _POS,
        "integrator": _INTEGRATOR,
        "obs_encoding": {"enum": ["relative", "absolute"]},
        "position_range": _PAIR,
        "velocity_range": _PAIR,
        "angle_range": _PAIR,
    },
}

_PLATOON_PARAMS = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "cars": {"type": "integer", "minimum": 2},
        "friction": {"type": "number", "minimum": 0},
        "gravity": _POS,
        "accel_limit": _POS,
        "velocity_range": _PAIR,
        "dt": _POS,
        "integrator": _INTEGRATOR,
    },
}

_VEHICLE_PARAMS = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "mass": _POS,
        "wheel_radius": _POS,
        "gear_ratio": _POS,
        "rolling_coeff": {"type": "number", "minimum": 0},
        "air_density": {"type": "number", "minimum": 0},
        "drag_coeff": {"type": "number", "minimum": 0},
        "frontal_area": {"type": "number", "minimum": 0},
        "motor_torque_max": _POS,
        "motor_speed_cap_rpm": _POS,
        "brake_torque_max": _POS,
        "velocity_range": _PAIR,
        "dt": _POS,
        "integrator": _INTEGRATOR,
        "efficiency": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "peak": _FRACTION,
                "edge": _FRACTION,
                "peak_torque_frac": _FRACTION,
                "peak_speed_frac": _FRACTION,
                "torque_falloff": _POS,
                "speed_falloff": _POS,
            },
        },
    },
}

_REQUIREMENT_ITEM = {
    "type": "object",
    "additionalProperties": False,
    "required": ["label", "weight", "formula"],
    "properties": {
        "label": {"type": "string", "minLength": 1},
        "weight": _POS,
        "formula": {"type": "object"},
    },
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["system"],
    "properties": {
        "system": {"enum": ["cartpole", "platoon_basic", "platoon_energy"]},
        "seed": _COUNT,
        "train": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "horizon": {"type": "integer", "minimum": 2},
                "window": {"type": "integer", "minimum": 1},
                "iterations": _COUNT,
                "attacker_steps": _COUNT,
                "defender_steps": _COUNT,
                "lr_attacker": _POS,
                "lr_defender": _POS,
                "adam_beta1": _FRACTION,
                "adam_beta2": _FRACTION,
                "adam_eps": _POS,
                "grad_clip": _POS,
                "resample_retries": _COUNT,
            },
        },
        "test": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "samples": {"type": "integer", "minimum": 1},
                "horizon": {"type": "integer", "minimum": 2},
                "mode": {"enum": ["adversarial", "fixed"]},
            },
        },
        "attacker": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"hidden": _HIDDEN, "noise_dim": _COUNT},
        },
        "defender": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"hidden": _HIDDEN},
        },
        "weights": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"alpha": _FRACTION},
        },
        "system_params": {"type": "object"},
        "bounds": {"type": "object"},
        "initial": {"type": "object"},
        "requirements": {"type": "array", "minItems": 1,
                         "items": _REQUIREMENT_ITEM},
    },
    "allOf": [
        {
            "if": {"properties": {"system": {"const": "cartpole"}},
                   "required": ["system"]},
            "then": {
                "properties": {
                    "system_params": _CARTPOLE_PARAMS,
                    "bounds": {
                        "type": "object",
                        "additionalProperties": False,
                        "properties": {"distance": _PAIR, "angle": _PAIR},
                    },
                    "initial": {
                        "type": "object",
                        "additionalProperties": False,
                        "properties": {
                            "position": _PAIR,
                            "velocity": _PAIR,
                            "angle": _PAIR,
                            "angular_velocity": _PAIR,
                            "target_offset": _PAIR,
                        },
                    },
                },
            },
        },
        {
            "if": {"properties": {"system": {"const": "platoon_basic"}},
                   "required": ["system"]},
            "then": {
                # basic mode has a single kind of requirement, nothing to weigh
                "not": {"required": ["weights"]},
                "properties": {
                    "system_params": _PLATOON_PARAMS,
                    "bounds": {
                        "type": "object",
                        "additionalProperties": False,
                        "properties": {"gap": _PAIR},
                    },
                    "initial": {
                        "type": "object",
                        "additionalProperties": False,
                        "properties": {"gap": _PAIR, "velocity": _PAIR},
                    },
                },
            },
        },
        {
            "if": {"properties": {"system": {"const": "platoon_energy"}},
                   "required": ["system"]},
            "then": {
                "properties": {
                    "system_params": _VEHICLE_PARAMS,
                    "bounds": {
                        "type": "object",
                        "additionalProperties": False,
                        "properties": {"gap": _PAIR, "energy_budget": _POS},
                    },
                    "initial": {
                        "type": "object",
                        "additionalProperties": False,
                        "properties": {"gap": _PAIR, "velocity": _PAIR},
                    },
                },
            },
        },
    ],
}


# ---------------------------------------------------------------------------
# Defaults and presets

_TRAIN_DEFAULTS = {
    "horizon": 40,
    "window": 10,
    "iterations": 500,
    "attacker_steps": 1,
    "defender_steps": 2,
    "lr_attacker": 1e-3,
    "lr_defender": 1e-3,
    "adam_beta1": 0.9,
    "adam_beta2": 0.999,
    "adam_eps": 1e-8,
    "grad_clip": 10.0,
    "resample_retries": 10,
}

_TEST_DEFAULTS = {"samples": 1000, "horizon": 200, "mode": "adversarial"}

_DEFAULTS = {
    "cartpole": {
        "system": "cartpole",
        "seed": 0,
        "train": dict(_TRAIN_DEFAULTS),
        "test": dict(_TEST_DEFAULTS),
        "attacker": {"hidden": [10], "noise_dim": 3},
        "defender": {"hidden": [10, 10]},
        "weights": {"alpha": 0.4},
        "system_params": {},
        "bounds": {"distance": [-1.0, 1.5], "angle": [-0.785, 0.785]},
        "initial": {
            "position": [-1.0, 1.0],
            "velocity": [-1.0, 1.0],
            "angle": [-0.1, 0.1],
            "angular_velocity": [-1.0, 1.0],
            "target_offset": [0.0, 0.0],
        },
    },
    "platoon_basic": {
        "system": "platoon_basic",
        "seed": 0,
        "train": dict(_TRAIN_DEFAULTS, iterations=1000),
        "test": dict(_TEST_DEFAULTS),
        "attacker": {"hidden": [10], "noise_dim": 2},
        "defender": {"hidden": [10, 10]},
        "system_params": {},
        "bounds": {"gap": [1.0, 10.0]},
        "initial": {"gap": [2.0, 6.0], "velocity": [15.0, 20.0]},
    },
    "platoon_energy": {
        "system": "platoon_energy",
        "seed": 0,
        "train": dict(_TRAIN_DEFAULTS, iterations=1000),
        "test": dict(_TEST_DEFAULTS),
        "attacker": {"hidden": [10], "noise_dim": 2},
        "defender": {"hidden": [10, 10]},
        "weights": {"alpha": 0.98},
        "system_params": {},
        "bounds": {"gap": [1.0, 10.0], "energy_budget": 30000.0},
        "initial": {"gap": [2.0, 6.0], "velocity": [15.0, 20.0]},
    },
}

PRESETS = {
    # distance/angle cart-pole game, 500 outer iterations.  The tracking
    # corridor is sized for what lean-limited acceleration can actually
    # hold against a full-rate target reversal (the cart cannot out-
    # accelerate g*tan(angle bound), so the corridor must absorb the
    # turnaround excursion).  Initial target offsets span the corridor so
    # short training rollouts still visit large tracking errors.
    "cartpole_table1": {
        "system": "cartpole",
        "seed": 0,
        "train": {"horizon": 40, "window": 10, "iterations": 500,
                  "attacker_steps": 1, "defender_steps": 2},
        "test": {"samples": 1000, "horizon": 200, "mode": "adversarial"},
        "weights": {"alpha": 0.4},
        "bounds": {"distance": [-1.0, 5.0]},
        "initial": {"target_offset": [-4.0, 4.0]},
    },
    # acceleration-driven two-car platoon with a gap requirement
    "platoon_basic": {
        "system": "platoon_basic",
        "seed": 0,
        "train": {"horizon": 40, "window": 10, "iterations": 1000,
                  "attacker_steps": 1, "defender_steps": 2},
        "test": {"samples": 1000, "horizon": 200, "mode": "adversarial"},
    },
    # torque-driven platoon with gap and per-window energy budget
    "platoon_table2": {
        "system": "platoon_energy",
        "seed": 0,
        "train": {"horizon": 40, "window": 10, "iterations": 1000,
                  "attacker_steps": 1, "defender_steps": 2},
        "test": {"samples": 1000, "horizon": 200, "mode": "adversarial"},
        "weights": {"alpha": 0.98},
        "bounds": {"gap": [1.0, 10.0], "energy_budget": 30000.0},
    },
}


def preset_config(name: str) -> dict:
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        known = ", ".join(sorted(PRESETS))
        raise ConfigError(f"unknown preset {name!r}; available: {known}") from None


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    return cfg


def validate_config(cfg: dict) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {err.message}")


# ---------------------------------------------------------------------------
# Seeds and hashing


def subseed(root: int, label: str) -> int:
    """Stable 64-bit stream seed for one purpose label."""
    digest = hashlib.sha256(f"{root}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def derive_rng(root: int, label: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(subseed(root, label)))


def derive_seedseq(root: int, label: str) -> np.random.SeedSequence:
    return np.random.SeedSequence(subseed(root, label))


def config_hash(effective: dict) -> str:
    """sha256 over the canonical JSON form of the merged configuration.

    The seed is excluded: it names a run, not an experiment, and weight
    files record it separately.  Everything that changes the game being
    played changes the hash.
    """
    doc = {key: value for key, value in effective.items() if key != "seed"}
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _merge(base, override):
    if isinstance(base, dict) and isinstance(override, dict):
        out = dict(base)
        for key, value in override.items():
            out[key] = _merge(base.get(key), value) if key in base else value
        return out
    return copy.deepcopy(override)


def _tuplize(value):
    if isinstance(value, list):
        return tuple(_tuplize(v) for v in value)
    return value


def _param_kwargs(raw: dict) -> dict:
    return {key: _tuplize(value) for key, value in raw.items()}


# ---------------------------------------------------------------------------
# Resolution


@dataclass
class ResolvedConfig:
    """Everything a run needs, built from one validated configuration."""

    system: str
    effective: dict
    config_hash: str
    seed: int
    model: SystemModel
    reqs: RequirementSet
    sampler: object
    atk_spec: MlpSpec
    def_spec: MlpSpec
    atk_factory: object
    def_factory: object
    train: TrainConfig
    window: int
    test_samples: int
    test_horizon: int
    test_mode: str
    params: object            # the physics parameter object


def _custom_requirements(eff: dict, window: int, transform=None) -> RequirementSet:
    items = []
    for entry in eff["requirements"]:
        try:
            phi = formula_from_dict(entry["formula"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(
                f"requirement {entry['label']!r}: bad formula: {exc}") from exc
        items.append((phi, float(entry["weight"]), entry["label"]))
    try:
        return RequirementSet(items, window, window_transform=transform)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _obs_dims(model: SystemModel):
    dummy = (0.0,) * len(model.state_labels)
    return (len(model.obs_ctl(dummy, FLOAT_OPS)),
            len(model.obs_env(dummy, FLOAT_OPS)))


def resolve_config(cfg: dict, seed: int | None = None) -> ResolvedConfig:
    """Validate, fill defaults and build the run ingredients.

    ``seed`` overrides the configuration's own seed (used by the
    command line).  The content hash covers the merged configuration
    except the seed.
    """
    validate_config(cfg)
    system = cfg["system"]
    eff = _merge(_DEFAULTS[system], cfg)
    if seed is not None:
        eff["seed"] = int(seed)
    validate_config(eff)

    tr = eff["train"]
    window = tr["window"]
    train_cfg = TrainConfig(
        horizon=tr["horizon"],
        iterations=tr["iterations"],
        attacker_steps=tr["attacker_steps"],
        defender_steps=tr["defender_steps"],
        lr_attacker=tr["lr_attacker"],
        lr_defender=tr["lr_defender"],
        adam_beta1=tr["adam_beta1"],
        adam_beta2=tr["adam_beta2"],
        adam_eps=tr["adam_eps"],
        grad_clip=tr["grad_clip"],
        resample_retries=tr["resample_retries"],
    )
    if train_cfg.horizon < window:
        raise ConfigError(
            f"train.horizon ({train_cfg.horizon}) must be at least "
            f"train.window ({window})")

    bounds = eff["bounds"]
    if system == "cartpole":
        params = CartPoleParams(**_param_kwargs(eff["system_params"]))
        model = build_cartpole(params)
        if "requirements" in eff:
            reqs = _custom_requirements(eff, window)
        else:
            reqs = cartpole_requirements(
                window, eff["weights"]["alpha"],
                distance_bounds=tuple(bounds["distance"]),
                angle_bounds=tuple(bounds["angle"]))
        sampler = cartpole_initial_sampler(
            {key: tuple(value) for key, value in eff["initial"].items()})
        followers = 1
    elif system == "platoon_basic":
        params = PlatoonParams(**_param_kwargs(eff["system_params"]))
        model = build_platoon_basic(params)
        if "requirements" in eff:
            reqs = _custom_requirements(eff, window)
        else:
            reqs = platoon_requirements(
                window, "basic", gap_bounds=tuple(bounds["gap"]),
                cars=params.cars)
        sampler = platoon_initial_sampler(
            "basic", {key: tuple(value) for key, value in eff["initial"].items()},
            cars=params.cars)
        followers = params.cars - 1
    else:
        raw = _param_kwargs(eff["system_params"])
        if "efficiency" in raw:
            raw["efficiency"] = EfficiencyParams(**dict(raw["efficiency"]))
        params = VehicleParams(**raw)
        model = build_platoon_energy(params)
        # energy is always measured from the window head, also under
        # custom requirement sets
        if "requirements" in eff:
            reqs = _custom_requirements(eff, window, transform=_energy_rebase)
        else:
            reqs = platoon_requirements(
                window, "energy", eff["weights"]["alpha"],
                gap_bounds=tuple(bounds["gap"]),
                energy_budget=bounds["energy_budget"])
        sampler = platoon_initial_sampler(
            "energy", {key: tuple(value) for key, value in eff["initial"].items()})
        followers = 1

    obs_ctl, obs_env = _obs_dims(model)

    def _scale_for(dim):
        sc = model.obs_scale
        return sc if sc is not None and len(sc) == dim else None

    atk_spec = attacker_spec(obs_env, model.action_space_env,
                             noise_dim=eff["attacker"]["noise_dim"],
                             hidden=tuple(eff["attacker"]["hidden"]),
                             input_scale=_scale_for(obs_env))
    if system == "platoon_basic" and followers > 1:
        # one shared follower network, applied per car
        block_obs = obs_ctl // followers
        block_space = model.action_space_ctl[:1]
        def_spec = defender_spec(block_obs, block_space,
                                 hidden=tuple(eff["defender"]["hidden"]),
                                 input_scale=_scale_for(block_obs))
        base = policy_factory(def_spec)
        def_factory = lambda theta, ops: SharedDefender(base(theta, ops),
                                                        followers)
    else:
        def_spec = defender_spec(obs_ctl, model.action_space_ctl,
                                 hidden=tuple(eff["defender"]["hidden"]),
                                 input_scale=_scale_for(obs_ctl))
        def_factory = policy_factory(def_spec)
    atk_factory = policy_factory(atk_spec)

    return ResolvedConfig(
        system=system,
        effective=eff,
        config_hash=config_hash(eff),
        seed=eff["seed"],
        model=model,
        reqs=reqs,
        sampler=sampler,
        atk_spec=atk_spec,
        def_spec=def_spec,
        atk_factory=atk_factory,
        def_factory=def_factory,
        train=train_cfg,
        window=window,
        test_samples=eff["test"]["samples"],
        test_horizon=eff["test"]["horizon"],
        test_mode=eff["test"]["mode"],
        params=params,
    )
