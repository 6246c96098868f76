"""Discrete-time closed-loop simulation of a plant under two policies.

A :class:`SystemModel` packages the plant: state layout, observation
maps for both players, action spaces, the per-step state increment and
the monitored signals that requirements are written over.  The state
advances as ``s[i+1] = s[i] + increment(s[i], u_ctl, u_env, t[i])`` with
``t[i] = t0 + i*dt``; the increment already folds in the step size, so
a model is free to use a semi-implicit update internally (velocities
first, then positions with the fresh velocities).

``rollout`` runs the loop on plain floats; ``rollout_diff`` runs the
identical loop with parameters, actions and states recorded on an
autodiff tape.  Both paths execute the same scalar operations in the
same order, so their forward values agree exactly given the same noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .autodiff import FLOAT_OPS, Tape, TapeOps
from .stl import Trajectory

__all__ = [
    "SimulationError",
    "SystemModel",
    "GaussianNoise",
    "FixedNoise",
    "clamp_action",
    "step",
    "rollout",
    "rollout_diff",
    "RolloutRecord",
]


class SimulationError(RuntimeError):
    """A state component left the finite range during integration."""


@dataclass(frozen=True)
class SystemModel:
    """A plant wired for the two-player closed loop.

    ``increment(state, u_ctl, u_env, t, ops, events)`` returns the state
    delta for one step.  ``obs_ctl``/``obs_env`` expose what each player
    sees; ``monitored`` maps a state to the signal vector requirements
    are written over.  ``constraint_box`` optionally lists per-component
    operating bounds; leaving them is recorded as an event, not an error.
    ``state_clamp`` optionally lists per-component physical limits; after
    each step the affected components saturate onto them (hitting a limit
    is likewise recorded as an event, never an error).  ``obs_scale``
    optionally gives the typical magnitude of each observation component
    (both players see the same encoding); policy networks divide by it so
    wide coordinate ranges do not saturate their first layer.
    """

    name: str
    state_labels: tuple[str, ...]
    monitored_labels: tuple[str, ...]
    action_space_ctl: tuple[tuple[float, float], ...]
    action_space_env: tuple[tuple[float, float], ...]
    increment: Callable
    obs_ctl: Callable
    obs_env: Callable
    monitored: Callable
    dt: float
    constraint_box: tuple | None = None
    state_clamp: tuple | None = None
    obs_scale: tuple[float, ...] | None = None

    def __post_init__(self):
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise ValueError(f"step size must be positive, got {self.dt!r}")
        for space in (self.action_space_ctl, self.action_space_env):
            for lo, hi in space:
                if not lo < hi:
                    raise ValueError(f"action interval out of order: [{lo}, {hi}]")
        if self.state_clamp is not None:
            if len(self.state_clamp) != len(self.state_labels):
                raise ValueError("state_clamp must cover every state component")
            for bounds in self.state_clamp:
                if bounds is not None and not bounds[0] < bounds[1]:
                    raise ValueError(
                        f"state limit out of order: [{bounds[0]}, {bounds[1]}]")

    @property
    def state_dim(self) -> int:
        return len(self.state_labels)


class GaussianNoise:
    """Standard-normal per-step noise drawn from a numpy generator."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def sample(self, steps: int, dim: int) -> list[tuple[float, ...]]:
        if dim == 0:
            return [()] * steps
        block = self.rng.standard_normal((steps, dim))
        return [tuple(row) for row in block.tolist()]


class FixedNoise:
    """Replays a recorded noise block (for paired or repeated rollouts)."""

    def __init__(self, block: Sequence[Sequence[float]]):
        self.block = [tuple(float(v) for v in row) for row in block]

    def sample(self, steps: int, dim: int) -> list[tuple[float, ...]]:
        if steps > len(self.block):
            raise ValueError(
                f"recorded noise covers {len(self.block)} steps, need {steps}")
        for row in self.block[:steps]:
            if len(row) != dim:
                raise ValueError(
                    f"recorded noise has width {len(row)}, expected {dim}")
        return self.block[:steps]


@dataclass
class RolloutRecord:
    """Everything produced by one closed-loop run.

    ``trajectory`` holds the monitored signals; ``states`` the raw state
    vectors (one more entry than actions).  ``events`` collects non-fatal
    incidents such as operating-constraint exits, as (step, tag) pairs.
    """

    trajectory: Trajectory
    states: list
    actions_ctl: list
    actions_env: list
    noise: list
    t0: float
    events: list = field(default_factory=list)


def clamp_action(action, space, ops=FLOAT_OPS):
    """Componentwise clamp of an action vector onto its action space."""
    if len(action) != len(space):
        raise ValueError(
            f"action has {len(action)} components, space expects {len(space)}")
    return tuple(ops.clamp(a, lo, hi) for a, (lo, hi) in zip(action, space))


def step(model: SystemModel, state, u_ctl, u_env, t, ops=FLOAT_OPS,
         events: list | None = None, index: int = 0):
    """Advance one step, verify finiteness, saturate onto physical limits."""
    inc = model.increment(state, u_ctl, u_env, t, ops, events)
    if len(inc) != len(state):
        raise ValueError(
            f"increment has {len(inc)} components, state has {len(state)}")
    nxt = tuple(s + d for s, d in zip(state, inc))
    value = ops.value
    for k, comp in enumerate(nxt):
        if not math.isfinite(value(comp)):
            raise SimulationError(
                f"state component {model.state_labels[k]!r} became non-finite "
                f"at step {index}")
    if model.state_clamp is not None:
        clamped = []
        for k, comp in enumerate(nxt):
            bounds = model.state_clamp[k]
            if bounds is None:
                clamped.append(comp)
                continue
            lo, hi = bounds
            if events is not None:
                v = value(comp)
                if v < lo or v > hi:
                    events.append(
                        (index + 1, f"limit:{model.state_labels[k]}"))
            clamped.append(ops.clamp(comp, lo, hi))
        nxt = tuple(clamped)
    return nxt


def _run(model: SystemModel, s0, defender, attacker, steps: int,
         noise_source, ops, t0: float) -> RolloutRecord:
    if len(s0) != model.state_dim:
        raise ValueError(
            f"initial state has {len(s0)} components, model expects "
            f"{model.state_dim}")
    if steps < 0:
        raise ValueError("steps must be non-negative")
    noise = noise_source.sample(steps, attacker.noise_dim)
    events: list = []
    box = model.constraint_box
    value = ops.value
    state = tuple(s0)
    states = [state]
    acts_ctl: list = []
    acts_env: list = []
    dt = model.dt
    for j in range(steps):
        t = t0 + j * dt
        u_env = clamp_action(attacker.act(model.obs_env(state, ops), noise[j], j),
                             model.action_space_env, ops)
        u_ctl = clamp_action(defender.act(model.obs_ctl(state, ops), (), j),
                             model.action_space_ctl, ops)
        state = step(model, state, u_ctl, u_env, t, ops, events, j)
        if box is not None:
            for k, bounds in enumerate(box):
                if bounds is None:
                    continue
                v = value(state[k])
                if v < bounds[0] or v > bounds[1]:
                    events.append((j + 1, f"constraint:{model.state_labels[k]}"))
        states.append(state)
        acts_ctl.append(u_ctl)
        acts_env.append(u_env)
    monitored = [model.monitored(s, ops) for s in states]
    if ops is FLOAT_OPS:
        trajectory = Trajectory(monitored, dt)
    else:
        # bypass float validation; node states are checked via step()
        trajectory = Trajectory.__new__(Trajectory)
        trajectory.states = tuple(tuple(m) for m in monitored)
        trajectory.dt = dt
    return RolloutRecord(trajectory, states, acts_ctl, acts_env,
                         list(noise), t0, events)


def rollout(model: SystemModel, s0, defender, attacker, steps: int,
            noise_source, t0: float = 0.0) -> RolloutRecord:
    """Closed-loop run on plain floats; H steps yield H+1 states."""
    s0 = tuple(float(v) for v in s0)
    return _run(model, s0, defender, attacker, steps, noise_source,
                FLOAT_OPS, t0)


def rollout_diff(model: SystemModel, s0, defender, attacker, steps: int,
                 noise_source, tape: Tape, t0: float = 0.0) -> RolloutRecord:
    """Closed-loop run recorded on a tape.

    ``defender``/``attacker`` must already be bound to nodes of ``tape``
    (their parameters are the differentiation inputs).  The initial state
    is lifted as constants.  Forward values equal ``rollout`` exactly for
    the same noise.
    """
    ops = TapeOps(tape)
    lifted = tuple(tape.const(float(v)) for v in s0)
    return _run(model, lifted, defender, attacker, steps, noise_source,
                ops, t0)
