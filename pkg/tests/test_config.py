"""Configuration schema, merging, hashing, and resolution."""

import copy
import json

import numpy as np
import pytest

from advctrl.config import (PRESETS, ConfigError, config_hash, derive_rng,
                            derive_seedseq, load_config, preset_config,
                            resolve_config, subseed, validate_config)
from advctrl.policy import SharedDefender
from advctrl.autodiff import FLOAT_OPS


def minimal(system="cartpole", **extra):
    cfg = {"system": system}
    cfg.update(extra)
    return cfg


# ---------------------------------------------------------------------------
# Validation


def test_minimal_configs_validate():
    for system in ("cartpole", "platoon_basic", "platoon_energy"):
        validate_config(minimal(system))


def test_system_is_required_and_closed():
    with pytest.raises(ConfigError, match="system"):
        validate_config({})
    with pytest.raises(ConfigError, match="system"):
        validate_config({"system": "rocket"})


def test_unknown_keys_are_rejected_at_every_level():
    bad = [
        minimal(extra_key=1),
        minimal(train={"horizon": 40, "warmup": 3}),
        minimal(test={"samples": 10, "shuffle": True}),
        minimal(attacker={"hidden": [4], "dropout": 0.1}),
        minimal(system_params={"cart_mass": 1.0, "wheelbase": 2.0}),
    ]
    for cfg in bad:
        with pytest.raises(ConfigError):
            validate_config(cfg)


def test_type_and_range_errors_carry_a_path():
    with pytest.raises(ConfigError, match="train/horizon"):
        validate_config(minimal(train={"horizon": 1}))
    with pytest.raises(ConfigError, match="weights/alpha"):
        validate_config(minimal(weights={"alpha": 1.0}))
    with pytest.raises(ConfigError, match="test/mode"):
        validate_config(minimal(test={"mode": "nominal"}))


def test_basic_platoon_has_no_weighting_knob():
    cfg = minimal("platoon_basic", weights={"alpha": 0.5})
    with pytest.raises(ConfigError):
        validate_config(cfg)
    validate_config(minimal("platoon_energy", weights={"alpha": 0.5}))


def test_system_params_are_checked_per_system():
    validate_config(minimal("cartpole", system_params={"pole_length": 0.6}))
    with pytest.raises(ConfigError):
        validate_config(minimal("platoon_basic",
                                system_params={"pole_length": 0.6}))
    validate_config(minimal("platoon_energy",
                            system_params={"gear_ratio": 1.2,
                                           "efficiency": {"peak": 0.9}}))


def test_presets_all_validate_and_resolve():
    for name in PRESETS:
        resolved = resolve_config(preset_config(name))
        assert resolved.system == PRESETS[name]["system"]
        assert resolved.train.horizon >= resolved.window
        assert resolved.test_samples == 1000
        assert resolved.test_horizon == 200


def test_preset_lookup_is_a_defensive_copy():
    cfg = preset_config("cartpole_table1")
    cfg["train"]["horizon"] = 999
    assert PRESETS["cartpole_table1"]["train"]["horizon"] == 40
    with pytest.raises(ConfigError, match="available"):
        preset_config("cartpole_table9")


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(str(bad))
    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="JSON object"):
        load_config(str(arr))
    good = tmp_path / "good.json"
    good.write_text(json.dumps(minimal()))
    assert load_config(str(good)) == {"system": "cartpole"}


# ---------------------------------------------------------------------------
# Seeds and hashing


def test_subseed_is_stable_and_label_separated():
    assert subseed(42, "noise") == subseed(42, "noise")
    assert subseed(42, "noise") != subseed(42, "sampler")
    assert subseed(42, "noise") != subseed(43, "noise")
    assert 0 <= subseed(0, "") < 2 ** 64
    a = derive_rng(7, "noise").normal(size=3)
    b = derive_rng(7, "noise").normal(size=3)
    assert np.array_equal(a, b)
    assert derive_seedseq(7, "x").entropy == subseed(7, "x")


def test_config_hash_ignores_seed_but_nothing_else():
    base = resolve_config(preset_config("cartpole_table1"))
    reseeded = resolve_config(preset_config("cartpole_table1"), seed=999)
    assert base.config_hash == reseeded.config_hash
    assert reseeded.seed == 999

    cfg = preset_config("cartpole_table1")
    cfg["train"]["horizon"] = 41
    assert resolve_config(cfg).config_hash != base.config_hash


def test_config_hash_is_order_insensitive():
    a = {"system": "cartpole", "train": {"horizon": 40}}
    b = {"train": {"horizon": 40}, "system": "cartpole"}
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash({"system": "cartpole"})


# ---------------------------------------------------------------------------
# Resolution


def test_resolution_applies_defaults_and_overrides():
    resolved = resolve_config(minimal("cartpole",
                                      train={"iterations": 7}))
    assert resolved.train.iterations == 7
    assert resolved.train.horizon == 40          # untouched default
    assert resolved.window == 10
    assert resolved.reqs.window == 10
    assert resolved.reqs.labels == ("distance", "angle")
    assert resolved.params.pole_length == 0.5


def test_resolution_rejects_horizon_below_window():
    cfg = minimal("cartpole", train={"horizon": 9, "window": 10})
    with pytest.raises(ConfigError, match="window"):
        resolve_config(cfg)


def test_resolved_specs_line_up_with_the_model():
    r = resolve_config(minimal("cartpole"))
    obs = len(r.model.obs_ctl(r.sampler(derive_rng(0, "s")), FLOAT_OPS))
    assert r.def_spec.sizes[0] == obs
    assert r.def_spec.sizes[-1] == len(r.model.action_space_ctl)
    assert r.atk_spec.sizes[0] == obs + r.atk_spec.noise_dim
    assert r.atk_spec.sizes[-1] == len(r.model.action_space_env)
    policy = r.def_factory([0.0] * r.def_spec.param_count, FLOAT_OPS)
    act = policy.act(r.model.obs_ctl(r.sampler(derive_rng(0, "s")), FLOAT_OPS))
    assert len(act) == len(r.model.action_space_ctl)


def test_platoon_chain_resolves_to_a_shared_defender():
    cfg = minimal("platoon_basic", system_params={"cars": 3})
    r = resolve_config(cfg)
    assert len(r.model.action_space_ctl) == 2
    # one network is trained on a single follower's observation block
    assert r.def_spec.sizes[0] == 3
    assert r.def_spec.sizes[-1] == 1
    policy = r.def_factory([0.0] * r.def_spec.param_count, FLOAT_OPS)
    assert isinstance(policy, SharedDefender)
    obs = r.model.obs_ctl(r.sampler(derive_rng(1, "s")), FLOAT_OPS)
    assert len(policy.act(obs)) == 2


def test_custom_requirements_override_the_built_ins():
    cfg = minimal("cartpole", requirements=[
        {"label": "tilt", "weight": 1.0,
         "formula": {"kind": "atom", "signal": 1, "direction": "upper",
                     "bound": 0.5, "scale": 1.0, "label": "tilt"}}])
    r = resolve_config(cfg)
    assert r.reqs.labels == ("tilt",)


def test_malformed_custom_formula_is_a_config_error():
    cfg = minimal("cartpole", requirements=[
        {"label": "bad", "weight": 1.0, "formula": {"kind": "banana"}}])
    with pytest.raises(ConfigError):
        resolve_config(cfg)


def test_energy_platoon_keeps_budget_rebase_with_custom_requirements():
    cfg = minimal("platoon_energy", requirements=[
        {"label": "gap_only", "weight": 1.0,
         "formula": {"kind": "atom", "signal": 0, "direction": "lower",
                     "bound": 1.0, "scale": 1.0, "label": "gap_only"}}])
    r = resolve_config(cfg)
    assert r.reqs.window_transform is not None
    states = [(5.0, 100.0), (5.0, 150.0)]
    rebased = r.reqs.window_transform(states, FLOAT_OPS)
    assert [s[1] for s in rebased] == [0.0, 50.0]


def test_effective_config_validates_after_merge():
    # a bad override must be caught even though the base preset is fine
    cfg = preset_config("cartpole_table1")
    cfg["train"]["horizon"] = 1
    with pytest.raises(ConfigError):
        resolve_config(cfg)
