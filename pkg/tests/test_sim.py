"""Closed-loop rollouts: shapes, clamping, noise replay, tape agreement."""

import numpy as np
import pytest

from advctrl.autodiff import FLOAT_OPS, Tape, TapeOps
from advctrl.policy import MlpPolicy, ReplayPolicy, attacker_spec, defender_spec, init_params
from advctrl.sim import (FixedNoise, GaussianNoise, SimulationError,
                         SystemModel, clamp_action, rollout, rollout_diff)


def toy_model(dt=0.1, blowup=False):
    """Double integrator: defender accelerates, attacker pushes."""

    def increment(state, u_ctl, u_env, t, ops, events=None):
        x, v = state
        a, = u_ctl
        w, = u_env
        dv = (a + w) * dt
        if blowup:
            dv = dv + x * 1e160 * x * 1e160
        return ((v + dv) * dt, dv)

    def obs(state, ops):
        return state

    return SystemModel(
        name="toy",
        state_labels=("x", "v"),
        monitored_labels=("x",),
        action_space_ctl=((-1.0, 1.0),),
        action_space_env=((-0.5, 0.5),),
        increment=increment,
        obs_ctl=obs,
        obs_env=obs,
        monitored=lambda s, ops: (s[0],),
        dt=dt,
        constraint_box=((-2.0, 2.0), None),
    )


class Pusher:
    """Deliberately out-of-range constant action."""

    noise_dim = 0

    def __init__(self, value):
        self.value = value

    def act(self, obs, noise=(), step=0):
        return (self.value,)


def test_rollout_shapes():
    model = toy_model()
    rec = rollout(model, (0.0, 0.0), Pusher(0.3), Pusher(0.0), 5,
                  GaussianNoise(np.random.default_rng(0)))
    assert len(rec.states) == 6
    assert len(rec.trajectory.states) == 6
    assert rec.trajectory.dim == 1
    assert len(rec.actions_ctl) == 5 and len(rec.actions_env) == 5
    assert rec.trajectory.dt == model.dt

    rec1 = rollout(model, (0.0, 0.0), Pusher(0.0), Pusher(0.0), 1,
                   GaussianNoise(np.random.default_rng(0)))
    assert len(rec1.states) == 2

    rec0 = rollout(model, (0.5, 0.0), Pusher(0.0), Pusher(0.0), 0,
                   GaussianNoise(np.random.default_rng(0)))
    assert len(rec0.states) == 1 and rec0.actions_ctl == []


def test_actions_are_clamped_to_their_spaces():
    model = toy_model()
    rec = rollout(model, (0.0, 0.0), Pusher(9.0), Pusher(-9.0), 4,
                  GaussianNoise(np.random.default_rng(0)))
    for a in rec.actions_ctl:
        assert a == (1.0,)
    for w in rec.actions_env:
        assert w == (-0.5,)
    assert clamp_action((3.0, -3.0), ((-1.0, 1.0), (0.0, 2.0)),
                        FLOAT_OPS) == (1.0, 0.0)


def test_constraint_exits_are_events_not_errors():
    model = toy_model()
    rec = rollout(model, (1.9, 2.0), Pusher(1.0), Pusher(0.5), 3,
                  GaussianNoise(np.random.default_rng(0)))
    assert rec.events
    step_idx, what = rec.events[0]
    assert what == "constraint:x"
    assert 1 <= step_idx <= 3


def test_divergence_raises_simulation_error_naming_the_component():
    model = toy_model(blowup=True)
    with pytest.raises(SimulationError, match="'x'.*step 0"):
        rollout(model, (1.0, 0.0), Pusher(0.0), Pusher(0.0), 3,
                GaussianNoise(np.random.default_rng(0)))


def test_noise_is_recorded_and_replayable():
    model = toy_model()
    spec = attacker_spec(2, [(-0.5, 0.5)], noise_dim=2)
    rng = np.random.default_rng(8)
    attacker = MlpPolicy(spec, init_params(spec, rng))
    defender = Pusher(0.2)
    rec = rollout(model, (0.1, 0.0), defender, attacker, 6,
                  GaussianNoise(np.random.default_rng(42)))
    assert len(rec.noise) == 6 and len(rec.noise[0]) == 2
    replayed = rollout(model, (0.1, 0.0), defender, attacker, 6,
                       FixedNoise(rec.noise))
    assert replayed.states == rec.states
    assert replayed.actions_env == rec.actions_env
    with pytest.raises(ValueError):
        rollout(model, (0.1, 0.0), defender, attacker, 7,
                FixedNoise(rec.noise))


def test_replay_policy_drives_the_environment():
    model = toy_model()
    script = [(0.5,), (-0.5,), (0.25,)]
    rec = rollout(model, (0.0, 0.0), Pusher(0.0), ReplayPolicy(script), 3,
                  GaussianNoise(np.random.default_rng(0)))
    assert rec.actions_env == [(0.5,), (-0.5,), (0.25,)]


def test_diff_rollout_matches_plain_rollout_bitwise():
    model = toy_model()
    aspec = attacker_spec(2, [(-0.5, 0.5)], noise_dim=2)
    dspec = defender_spec(2, [(-1.0, 1.0)])
    rng = np.random.default_rng(21)
    theta_a = init_params(aspec, rng)
    theta_d = init_params(dspec, rng)
    for trial in range(10):
        s0 = tuple(rng.normal(0.0, 0.5, 2))
        noise_rng = np.random.default_rng(100 + trial)
        plain = rollout(model, s0,
                        MlpPolicy(dspec, theta_d), MlpPolicy(aspec, theta_a),
                        8, GaussianNoise(noise_rng))
        tape = Tape()
        ops = TapeOps(tape)
        att = MlpPolicy(aspec, tape.inputs(theta_a.tolist()), ops)
        dfn = MlpPolicy(dspec, tape.inputs(theta_d.tolist()), ops)
        diff = rollout_diff(model, s0, dfn, att, 8, FixedNoise(plain.noise),
                            tape)
        assert [tuple(n.value for n in s) for s in diff.states] \
            == [tuple(s) for s in plain.states]
        assert [tuple(n.value for n in s) for s in diff.trajectory.states] \
            == [tuple(s) for s in plain.trajectory.states]


def test_wrong_initial_state_dimension_is_rejected():
    model = toy_model()
    with pytest.raises(ValueError):
        rollout(model, (0.0,), Pusher(0.0), Pusher(0.0), 1,
                GaussianNoise(np.random.default_rng(0)))
    with pytest.raises(ValueError):
        rollout(model, (0.0, 0.0), Pusher(0.0), Pusher(0.0), -1,
                GaussianNoise(np.random.default_rng(0)))


def test_model_validation():
    with pytest.raises(ValueError):
        toy_model(dt=0.0)
    with pytest.raises(ValueError):
        SystemModel(
            name="bad", state_labels=("x",), monitored_labels=("x",),
            action_space_ctl=((1.0, -1.0),), action_space_env=(),
            increment=lambda *a: (0.0,), obs_ctl=lambda s, o: s,
            obs_env=lambda s, o: s, monitored=lambda s, o: s, dt=0.1)
