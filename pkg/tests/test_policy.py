"""Networks: shapes, initialization, squashing, backend agreement."""

import math

import numpy as np
import pytest

from advctrl.autodiff import FLOAT_OPS, Tape, TapeOps
from advctrl.policy import (MlpPolicy, MlpSpec, ReplayPolicy, SharedDefender,
                            attacker_spec, defender_spec, init_params,
                            mlp_forward)


def test_spec_shapes_and_param_count():
    spec = attacker_spec(5, [(-1.0, 1.0), (0.0, 2.0)], noise_dim=3)
    assert spec.sizes == (8, 10, 2)
    assert spec.obs_dim == 5
    assert spec.noise_dim == 3
    assert spec.param_count == (8 + 1) * 10 + (10 + 1) * 2

    dspec = defender_spec(5, [(-30.0, 30.0)])
    assert dspec.sizes == (5, 10, 10, 1)
    assert dspec.noise_dim == 0
    assert dspec.param_count == 6 * 10 + 11 * 10 + 11 * 1


def test_spec_rejects_bad_bounds():
    with pytest.raises(ValueError):
        MlpSpec((3, 4, 1), (1.0,), (1.0,))
    with pytest.raises(ValueError):
        MlpSpec((3, 4, 2), (0.0,), (1.0, 2.0))
    with pytest.raises(ValueError):
        MlpSpec((3,), (0.0,), (1.0,))


def test_zero_parameters_give_interval_midpoints():
    spec = defender_spec(4, [(-30.0, 30.0), (2.0, 8.0)])
    policy = MlpPolicy(spec, np.zeros(spec.param_count))
    assert policy.act((0.3, -0.4, 2.0, 0.9)) == [0.0, 5.0]


def test_outputs_stay_strictly_inside_bounds():
    rng = np.random.default_rng(0)
    spec = attacker_spec(3, [(0.0, 1.0), (-5.0, 5.0)], noise_dim=2)
    for _ in range(50):
        theta = rng.normal(0.0, 3.0, spec.param_count)
        policy = MlpPolicy(spec, theta)
        obs = rng.normal(0.0, 5.0, 3)
        noise = rng.normal(0.0, 1.0, 2)
        out = policy.act(tuple(obs), tuple(noise))
        assert 0.0 <= out[0] <= 1.0
        assert -5.0 <= out[1] <= 5.0


def test_init_is_fan_balanced_with_zero_biases():
    spec = defender_spec(5, [(-1.0, 1.0)], hidden=(10, 10))
    rng = np.random.default_rng(123)
    theta = init_params(spec, rng)
    assert theta.shape == (spec.param_count,)
    pos = 0
    for nin, nout in zip(spec.sizes, spec.sizes[1:]):
        r = math.sqrt(6.0 / (nin + nout))
        w = theta[pos:pos + nin * nout]
        assert np.all(np.abs(w) <= r)
        assert np.abs(w).max() > 0.5 * r   # actually spread out
        pos += nin * nout
        b = theta[pos:pos + nout]
        assert np.all(b == 0.0)
        pos += nout


def test_init_is_deterministic_per_seed():
    spec = attacker_spec(4, [(-1.0, 1.0)], noise_dim=1)
    a = init_params(spec, np.random.default_rng(7))
    b = init_params(spec, np.random.default_rng(7))
    assert np.array_equal(a, b)


def test_wrong_parameter_or_noise_length_is_rejected():
    spec = attacker_spec(2, [(-1.0, 1.0)], noise_dim=1)
    with pytest.raises(ValueError):
        MlpPolicy(spec, np.zeros(spec.param_count - 1))
    policy = MlpPolicy(spec, np.zeros(spec.param_count))
    with pytest.raises(ValueError):
        policy.act((0.0, 0.0), ())
    with pytest.raises(ValueError):
        mlp_forward(spec, [0.0] * spec.param_count, [0.0, 0.0])


def test_tape_forward_matches_float_forward_bitwise():
    rng = np.random.default_rng(5)
    spec = defender_spec(3, [(-2.0, 2.0)], hidden=(6, 6))
    for _ in range(20):
        theta = rng.normal(0.0, 1.0, spec.param_count)
        obs = tuple(rng.normal(0.0, 1.0, 3))
        plain = MlpPolicy(spec, theta).act(obs)
        tape = Tape()
        nodes = tape.inputs(theta.tolist())
        policy = MlpPolicy(spec, nodes, TapeOps(tape))
        recorded = policy.act(tuple(tape.const(v) for v in obs))
        assert [n.value for n in recorded] == plain


def test_shared_defender_applies_one_network_per_block():
    spec = defender_spec(3, [(-5.0, 5.0)])
    rng = np.random.default_rng(3)
    theta = rng.normal(0.0, 1.0, spec.param_count)
    net = MlpPolicy(spec, theta)
    shared = SharedDefender(net, followers=3)
    obs = tuple(rng.normal(0.0, 1.0, 9))
    out = shared.act(obs)
    assert len(out) == 3
    for i in range(3):
        assert out[i] == net.act(obs[3 * i:3 * i + 3])[0]
    with pytest.raises(ValueError):
        shared.act(obs[:6])


def test_replay_policy_indexes_by_step():
    policy = ReplayPolicy([(1.0,), (2.0,), (3.0,)])
    assert policy.act((), step=0) == [1.0]
    assert policy.act((9.9,), step=2) == [3.0]
    assert policy.noise_dim == 0
    with pytest.raises(IndexError):
        policy.act((), step=3)
    with pytest.raises(ValueError):
        ReplayPolicy([])
    with pytest.raises(ValueError):
        ReplayPolicy([(1.0,), (1.0, 2.0)])


def test_hidden_layers_are_leaky_not_dead():
    # a network driven to negative preactivations still passes signal
    spec = MlpSpec((1, 1, 1), (-1.0,), (1.0,), leaky_slope=0.01)
    # weights: w0=1, b0 large negative, w1=1, b1=0
    theta = np.array([1.0, -100.0, 1.0, 0.0])
    policy = MlpPolicy(spec, theta)
    y0 = policy.act((0.0,))[0]
    y1 = policy.act((1.0,))[0]
    assert y0 != y1
