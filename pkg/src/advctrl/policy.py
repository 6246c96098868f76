"""Small feedforward policies for the attacker/defender game.

The attacker maps its observation plus a fresh standard-normal noise
vector to environment actions; the defender maps its observation to
control actions.  Default shapes: one hidden layer of 10 units for the
attacker, two hidden layers of 10 units for the defender, leaky-ReLU
activations throughout.

Outputs are squashed with a scaled tanh onto the declared action
interval, so actions stay strictly inside their bounds and gradients
never die against a hard clip (the simulator still applies a clamp as a
safety net).  An optional per-component ``input_scale`` divides each
observation before the first layer; systems whose coordinates span tens
of units need this so a fan-balanced first layer is not saturated from
the start.  The forward pass is written against the scalar backend from
:mod:`advctrl.autodiff`, so the same code produces plain floats or tape
nodes with bit-identical values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import FLOAT_OPS

__all__ = [
    "MlpSpec",
    "attacker_spec",
    "defender_spec",
    "init_params",
    "mlp_forward",
    "MlpPolicy",
    "SharedDefender",
    "ReplayPolicy",
]


@dataclass(frozen=True)
class MlpSpec:
    """Shape and output range of one policy network.

    ``sizes`` lists layer widths from input to output; the input width
    already includes any noise inputs (``noise_dim`` of them, appended
    after the observation).  ``out_lo``/``out_hi`` give the per-component
    action interval the tanh output is scaled onto.
    """

    sizes: tuple[int, ...]
    out_lo: tuple[float, ...]
    out_hi: tuple[float, ...]
    noise_dim: int = 0
    leaky_slope: float = 0.01
    input_scale: tuple[float, ...] | None = None

    def __post_init__(self):
        if len(self.sizes) < 2 or any(n < 1 for n in self.sizes):
            raise ValueError(f"bad layer sizes {self.sizes}")
        if len(self.out_lo) != self.sizes[-1] or len(self.out_hi) != self.sizes[-1]:
            raise ValueError("output bounds must match the output width")
        for lo, hi in zip(self.out_lo, self.out_hi):
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"bad output interval [{lo}, {hi}]")
        if not 0 <= self.noise_dim < self.sizes[0]:
            raise ValueError("noise_dim must leave room for the observation")
        if self.input_scale is not None:
            if len(self.input_scale) != self.obs_dim:
                raise ValueError("input_scale must match the observation width")
            if any(not math.isfinite(s) or s <= 0.0 for s in self.input_scale):
                raise ValueError(f"bad input scales {self.input_scale}")

    @property
    def obs_dim(self) -> int:
        return self.sizes[0] - self.noise_dim

    @property
    def param_count(self) -> int:
        return sum((nin + 1) * nout
                   for nin, nout in zip(self.sizes, self.sizes[1:]))


def attacker_spec(obs_dim: int, action_bounds, noise_dim: int,
                  hidden: tuple[int, ...] = (10,),
                  leaky_slope: float = 0.01,
                  input_scale=None) -> MlpSpec:
    """Default attacker shape: one hidden layer of 10 units."""
    lo = tuple(float(b[0]) for b in action_bounds)
    hi = tuple(float(b[1]) for b in action_bounds)
    sizes = (obs_dim + noise_dim, *hidden, len(lo))
    return MlpSpec(sizes, lo, hi, noise_dim=noise_dim,
                   leaky_slope=leaky_slope, input_scale=input_scale)


def defender_spec(obs_dim: int, action_bounds,
                  hidden: tuple[int, ...] = (10, 10),
                  leaky_slope: float = 0.01,
                  input_scale=None) -> MlpSpec:
    """Default defender shape: two hidden layers of 10 units."""
    lo = tuple(float(b[0]) for b in action_bounds)
    hi = tuple(float(b[1]) for b in action_bounds)
    sizes = (obs_dim + 0, *hidden, len(lo))
    return MlpSpec(sizes, lo, hi, noise_dim=0,
                   leaky_slope=leaky_slope, input_scale=input_scale)


def init_params(spec: MlpSpec, rng: np.random.Generator) -> np.ndarray:
    """Uniform fan-balanced weight init, zero biases.

    Each layer's weights are drawn from U(-r, r) with
    r = sqrt(6 / (fan_in + fan_out)); draw order is row-major by output
    unit, weights before biases, layers in order.
    """
    out = np.empty(spec.param_count, dtype=np.float64)
    pos = 0
    for nin, nout in zip(spec.sizes, spec.sizes[1:]):
        r = math.sqrt(6.0 / (nin + nout))
        w = rng.uniform(-r, r, size=nin * nout)
        out[pos:pos + nin * nout] = w
        pos += nin * nout
        out[pos:pos + nout] = 0.0
        pos += nout
    return out


def mlp_forward(spec: MlpSpec, theta, inputs, ops=FLOAT_OPS):
    """Evaluate the network on one input vector.

    ``theta`` is any indexable flat parameter sequence (floats or tape
    nodes); ``inputs`` likewise.  Returns a list of squashed outputs.
    Accumulation order is fixed (bias first, then weights by input
    index) so float and tape evaluations agree exactly.
    """
    if len(inputs) != spec.sizes[0]:
        raise ValueError(
            f"expected {spec.sizes[0]} inputs, got {len(inputs)}")
    slope = spec.leaky_slope
    leaky = ops.leaky_relu
    tanh = ops.tanh
    h = list(inputs)
    if spec.input_scale is not None:
        # observation components only; appended noise is already unit scale
        for i, s in enumerate(spec.input_scale):
            h[i] = h[i] / s
    pos = 0
    last = len(spec.sizes) - 2
    for li, (nin, nout) in enumerate(zip(spec.sizes, spec.sizes[1:])):
        w_base = pos
        b_base = pos + nin * nout
        nxt = []
        for j in range(nout):
            acc = theta[b_base + j]
            row = w_base + j * nin
            for i in range(nin):
                acc = acc + theta[row + i] * h[i]
            if li < last:
                acc = leaky(acc, slope)
            nxt.append(acc)
        h = nxt
        pos = b_base + nout
    out = []
    for j, y in enumerate(h):
        lo, hi = spec.out_lo[j], spec.out_hi[j]
        centre = (lo + hi) / 2.0
        half = (hi - lo) / 2.0
        out.append(centre + half * tanh(y))
    return out


class MlpPolicy:
    """A network bound to concrete parameters and a scalar backend.

    For plain rollouts pass the numpy parameter vector; for recorded
    rollouts pass the list of tape nodes for the same parameters plus
    the matching :class:`~advctrl.autodiff.TapeOps` backend.
    """

    def __init__(self, spec: MlpSpec, theta, ops=FLOAT_OPS):
        if isinstance(theta, np.ndarray):
            if theta.shape != (spec.param_count,):
                raise ValueError(
                    f"expected {spec.param_count} parameters, got {theta.shape}")
            theta = theta.tolist()
        elif len(theta) != spec.param_count:
            raise ValueError(
                f"expected {spec.param_count} parameters, got {len(theta)}")
        self.spec = spec
        self.theta = theta
        self.ops = ops

    @property
    def noise_dim(self) -> int:
        return self.spec.noise_dim

    def act(self, obs, noise=(), step: int = 0):
        if len(noise) != self.spec.noise_dim:
            raise ValueError(
                f"expected {self.spec.noise_dim} noise inputs, got {len(noise)}")
        inputs = list(obs) + list(noise)
        return mlp_forward(self.spec, self.theta, inputs, self.ops)


class SharedDefender:
    """One parameter vector steering every follower of a vehicle chain.

    The chain observation is the concatenation of per-follower blocks;
    the same underlying network is applied to each block and the outputs
    are concatenated, so all followers share a single source of truth.
    """

    def __init__(self, policy: MlpPolicy, followers: int):
        if followers < 1:
            raise ValueError("need at least one follower")
        self.policy = policy
        self.followers = followers
        self.block = policy.spec.obs_dim

    noise_dim = 0

    def act(self, obs, noise=(), step: int = 0):
        if len(obs) != self.block * self.followers:
            raise ValueError(
                f"expected {self.block * self.followers} observation values, "
                f"got {len(obs)}")
        out = []
        for i in range(self.followers):
            chunk = obs[i * self.block:(i + 1) * self.block]
            out.extend(self.policy.act(chunk, (), step))
        return out


class ReplayPolicy:
    """Replays a pre-recorded action sequence, ignoring observations.

    Used for fixed-environment evaluation, where the environment follows
    a recorded script instead of reacting to the system state.
    """

    noise_dim = 0

    def __init__(self, actions):
        actions = [tuple(float(v) for v in row) for row in actions]
        if not actions:
            raise ValueError("empty action sequence")
        width = len(actions[0])
        if any(len(row) != width for row in actions):
            raise ValueError("ragged action sequence")
        self.actions = actions

    def act(self, obs, noise=(), step: int = 0):
        if step >= len(self.actions):
            raise IndexError(
                f"recorded actions cover {len(self.actions)} steps, "
                f"step {step} requested")
        return list(self.actions[step])
