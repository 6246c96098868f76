"""Cart-pole under friction and moving-target attacks.

State: cart position and velocity, pole angle (zero upright) and
angular velocity, plus the target position the cart should shadow.
The controller applies a bounded horizontal force; the adversary picks
the cart-track friction coefficient and the target's drift rate each
step.

Accelerations, with f the applied force, mu the friction coefficient,
mc/mp the cart/pole masses and l the pole arm:

    x_dd  = (f - mu*x_d + mp*l*th_d^2*sin(th) - mp*g*cos(th)*sin(th))
            / (mc + mp*sin(th)^2)
    th_dd = (g*sin(th) - cos(th)*x_dd) / l

Integration is semi-implicit by default (velocities advance first and
the fresh velocities move the positions), selectable to explicit Euler.
Position, velocity and angle saturate onto their physical limits after
each step: the track has ends, the drive tops out, the pole hits its
stops.  The target shares the track, so it saturates onto the position
limits as well.

Monitored signals: the absolute cart-to-target distance and the pole
angle; the default requirements keep both inside configured boxes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..autodiff import FLOAT_OPS
from ..sim import SystemModel
from ..stl import Globally, RequirementSet, box_formula

__all__ = [
    "CartPoleParams",
    "cartpole_accelerations",
    "build_cartpole",
    "cartpole_requirements",
    "cartpole_initial_sampler",
]

STATE_LABELS = ("position", "velocity", "angle", "angular_velocity", "target")
MONITORED_LABELS = ("distance", "angle")


@dataclass(frozen=True)
class CartPoleParams:
    cart_mass: float = 1.0
    pole_mass: float = 0.1
    pole_length: float = 0.5          # m, pivot to centre of mass
    gravity: float = 9.81
    force_limit: float = 30.0         # N, controller force interval is +-limit
    friction_range: tuple[float, float] = (0.0, 1.0)
    target_rate_limit: float = 5.0    # m/s, adversarial target drift
    dt: float = 0.05
    integrator: str = "semi_implicit"
    # Reporting the state through to the policies: "relative" replaces the
    # raw target coordinate with the target offset (target - position),
    # an invertible recoding that keeps network inputs bounded when the
    # cart and target drift far from the origin together.
    obs_encoding: str = "relative"
    # Physical limits: track ends, drive saturation, pole stops.  The
    # state saturates onto them after each step (the target is a point
    # on the same track, so it shares the position limits); hitting a
    # limit is recorded as an event, never an error.
    position_range: tuple[float, float] = (-30.0, 30.0)
    velocity_range: tuple[float, float] = (-10.0, 10.0)
    angle_range: tuple[float, float] = (-1.5, 1.5)

    def __post_init__(self):
        if self.cart_mass <= 0 or self.pole_mass <= 0 or self.pole_length <= 0:
            raise ValueError("masses and pole length must be positive")
        if self.integrator not in ("semi_implicit", "explicit"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.obs_encoding not in ("relative", "absolute"):
            raise ValueError(f"unknown observation encoding {self.obs_encoding!r}")


def cartpole_accelerations(p: CartPoleParams, state, force, friction,
                           ops=FLOAT_OPS):
    """Cart and pole angular acceleration for the current state."""
    _, x_d, th, th_d, _ = state
    sin = ops.sin(th)
    cos = ops.cos(th)
    ml = p.pole_mass * p.pole_length
    num = force - friction * x_d + ml * th_d * th_d * sin \
        - p.pole_mass * p.gravity * cos * sin
    den = p.cart_mass + p.pole_mass * sin * sin
    x_dd = num / den
    th_dd = (p.gravity * sin - cos * x_dd) / p.pole_length
    return x_dd, th_dd


def build_cartpole(p: CartPoleParams = CartPoleParams()) -> SystemModel:
    dt = p.dt
    semi = p.integrator == "semi_implicit"

    def increment(state, u_ctl, u_env, t, ops, events=None):
        x, x_d, th, th_d, target = state
        force, = u_ctl
        friction, rate = u_env
        x_dd, th_dd = cartpole_accelerations(p, state, force, friction, ops)
        dv = x_dd * dt
        dw = th_dd * dt
        if semi:
            dx = (x_d + dv) * dt
            dth = (th_d + dw) * dt
        else:
            dx = x_d * dt
            dth = th_d * dt
        return (dx, dv, dth, dw, rate * dt)

    # typical magnitudes: clamp half-widths for position/velocity/angle,
    # twice the pendulum frequency sqrt(g/l) for the swing rate, one
    # second of full-rate target motion for the tracking error
    x_scale = 0.5 * (p.position_range[1] - p.position_range[0])
    v_scale = 0.5 * (p.velocity_range[1] - p.velocity_range[0])
    th_scale = 0.5 * (p.angle_range[1] - p.angle_range[0])
    w_scale = 2.0 * math.sqrt(p.gravity / p.pole_length)

    if p.obs_encoding == "relative":
        def observe(state, ops):
            x, x_d, th, th_d, target = state
            return (x, x_d, th, th_d, target - x)

        obs_scale = (x_scale, v_scale, th_scale, w_scale, p.target_rate_limit)
    else:
        def observe(state, ops):
            return state

        obs_scale = (x_scale, v_scale, th_scale, w_scale, x_scale)

    def monitored(state, ops):
        x, _, th, _, target = state
        return (ops.absolute(x - target), th)

    limits = (p.position_range, p.velocity_range, p.angle_range, None,
              p.position_range)
    return SystemModel(
        name="cartpole",
        state_labels=STATE_LABELS,
        monitored_labels=MONITORED_LABELS,
        action_space_ctl=((-p.force_limit, p.force_limit),),
        action_space_env=(p.friction_range,
                          (-p.target_rate_limit, p.target_rate_limit)),
        increment=increment,
        obs_ctl=observe,
        obs_env=observe,
        monitored=monitored,
        dt=dt,
        state_clamp=limits,
        obs_scale=obs_scale,
    )


DEFAULT_DISTANCE_BOUNDS = (-1.0, 1.5)   # lower bound inactive: distance >= 0
DEFAULT_ANGLE_BOUNDS = (-0.785, 0.785)


def cartpole_requirements(window: int, alpha: float = 0.4,
                          distance_bounds=DEFAULT_DISTANCE_BOUNDS,
                          angle_bounds=DEFAULT_ANGLE_BOUNDS) -> RequirementSet:
    """Keep the target distance and the pole angle inside their boxes.

    Each requirement demands its box over every step of the evaluation
    window; ``alpha`` weights the distance requirement, ``1 - alpha``
    the angle requirement.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie strictly inside (0, 1), got {alpha}")
    span = window - 1
    keep_distance = Globally(0, span, box_formula(0, *distance_bounds))
    keep_angle = Globally(0, span, box_formula(1, *angle_bounds))
    return RequirementSet(
        [(keep_distance, alpha, "distance"),
         (keep_angle, 1.0 - alpha, "angle")],
        window=window,
    )


DEFAULT_INIT = {
    "position": (-1.0, 1.0),
    "velocity": (-1.0, 1.0),
    "angle": (-0.1, 0.1),
    "angular_velocity": (-1.0, 1.0),
    "target_offset": (0.0, 0.0),
}


def cartpole_initial_sampler(init: dict | None = None):
    """Uniform initial-state sampler.

    The target starts at the cart position plus a uniform draw from
    ``target_offset`` (zero by default).  A nonzero offset range makes the
    controller see genuine tracking errors from the first step, so it has
    to learn a pursuit response rather than only a balance reflex.
    """
    cfg = dict(DEFAULT_INIT)
    if init:
        cfg.update(init)

    def sample(rng):
        x = float(rng.uniform(*cfg["position"]))
        x_d = float(rng.uniform(*cfg["velocity"]))
        th = float(rng.uniform(*cfg["angle"]))
        th_d = float(rng.uniform(*cfg["angular_velocity"]))
        tgt = x + float(rng.uniform(*cfg["target_offset"]))
        return (x, x_d, th, th_d, tgt)

    return sample
