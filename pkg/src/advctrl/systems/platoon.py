"""Vehicle platooning behind an adversarial leader.

Basic mode: every car is driven by a bounded acceleration input minus a
rolling-friction term, ``v_dot = a - friction*g``; velocities are kept
inside the configured range by projection.  The adversary drives the
leader, the defender drives the follower(s), and the monitored signals
are the inter-vehicle gaps.  With more than two cars every follower is
steered by the same shared defender observing its local triple
(front-car speed, own speed, own gap).

Energy mode (two cars): both cars are driven by motor and brake torque.
Wheel torque is ``T_m * gear_ratio + T_b``, longitudinal dynamics

    m * v_dot = T_wheel / wheel_radius
                - rolling_coeff * m * g * v
                - 0.5 * air_density * drag_coeff * frontal_area * v^2

and the motor spins at ``omega = gear_ratio / wheel_radius * v``.  Above
the motor speed cap the motor torque is forced to zero (logged as an
event).  The follower additionally accumulates electrical energy

    P = T_m * omega * eta(T_m, omega) ** (-sign(T_m))

where ``eta`` is a smooth efficiency surface, symmetric in torque sign,
peaking at a configurable fraction of maximum torque and speed and
falling off toward the map edges; regeneration (negative torque) pays
energy back but never drives the accumulator below zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..autodiff import FLOAT_OPS
from ..sim import SystemModel
from ..stl import Globally, RequirementSet, box_formula, upper_bound_atom

__all__ = [
    "PlatoonParams",
    "VehicleParams",
    "EfficiencyParams",
    "efficiency_map",
    "motor_power",
    "motor_speed",
    "build_platoon_basic",
    "build_platoon_energy",
    "platoon_requirements",
    "platoon_initial_sampler",
]


@dataclass(frozen=True)
class PlatoonParams:
    """Basic acceleration-driven platoon of ``cars`` vehicles."""

    cars: int = 2
    friction: float = 0.01            # rolling friction, v_dot = a - friction*g
    gravity: float = 9.81
    accel_limit: float = 5.0          # m/s^2, both players
    velocity_range: tuple[float, float] = (0.0, 37.0)
    dt: float = 0.05
    integrator: str = "semi_implicit"

    def __post_init__(self):
        if self.cars < 2:
            raise ValueError("a platoon needs at least two cars")
        if self.integrator not in ("semi_implicit", "explicit"):
            raise ValueError(f"unknown integrator {self.integrator!r}")


@dataclass(frozen=True)
class EfficiencyParams:
    peak: float = 0.92
    edge: float = 0.55
    peak_torque_frac: float = 0.6
    peak_speed_frac: float = 0.5
    torque_falloff: float = 0.22
    speed_falloff: float = 0.28

    def __post_init__(self):
        if not 0.0 < self.edge < self.peak <= 1.0:
            raise ValueError("efficiency must satisfy 0 < edge < peak <= 1")


@dataclass(frozen=True)
class VehicleParams:
    """Powertrain and body parameters for the energy-mode platoon.

    Body and drivetrain numbers are demo defaults for a small electric
    car geared so the motor stays under its speed cap across the whole
    operating velocity range.
    """

    mass: float = 1000.0              # kg
    wheel_radius: float = 0.30        # m
    gear_ratio: float = 0.95
    rolling_coeff: float = 0.001      # multiplies m*g*v in the drag force
    air_density: float = 1.225        # kg/m^3
    drag_coeff: float = 0.30
    frontal_area: float = 2.2         # m^2
    gravity: float = 9.81
    motor_torque_max: float = 180.0   # N*m
    motor_speed_cap_rpm: float = 1140.0
    brake_torque_max: float = 600.0   # N*m at the wheel, applied as <= 0
    velocity_range: tuple[float, float] = (0.0, 37.0)
    dt: float = 0.05
    integrator: str = "semi_implicit"
    efficiency: EfficiencyParams = field(default_factory=EfficiencyParams)

    def __post_init__(self):
        if self.integrator not in ("semi_implicit", "explicit"):
            raise ValueError(f"unknown integrator {self.integrator!r}")

    @property
    def motor_speed_cap(self) -> float:
        """Speed cap in rad/s."""
        return self.motor_speed_cap_rpm * math.pi / 30.0


def motor_speed(vp: VehicleParams, velocity):
    """Motor angular speed (rad/s) at a vehicle velocity."""
    return (vp.gear_ratio / vp.wheel_radius) * velocity


def efficiency_map(vp: VehicleParams, torque, omega, ops=FLOAT_OPS):
    """Smooth motor efficiency at a torque/speed operating point.

    Symmetric in torque sign; equals ``peak`` exactly at the configured
    peak fractions of maximum torque and cap speed and decays toward
    ``edge`` at the map borders.
    """
    ep = vp.efficiency
    du = ops.absolute(torque) / vp.motor_torque_max - ep.peak_torque_frac
    dw = omega / vp.motor_speed_cap - ep.peak_speed_frac
    ct = 1.0 / (2.0 * ep.torque_falloff * ep.torque_falloff)
    cw = 1.0 / (2.0 * ep.speed_falloff * ep.speed_falloff)
    gauss = ops.exp(-(du * du * ct + dw * dw * cw))
    return ep.peak - (ep.peak - ep.edge) * (1.0 - gauss)


def motor_power(torque, omega, eta, ops=FLOAT_OPS):
    """Electrical power: mechanical power divided by the efficiency when
    motoring, multiplied by it when regenerating."""
    sign = ops.value(torque)
    if sign > 0.0:
        return torque * omega / eta
    if sign < 0.0:
        return torque * omega * eta
    return torque * omega


# ---------------------------------------------------------------------------
# Basic mode


def build_platoon_basic(p: PlatoonParams = PlatoonParams()) -> SystemModel:
    n = p.cars
    dt = p.dt
    semi = p.integrator == "semi_implicit"
    drag = p.friction * p.gravity
    v_lo, v_hi = p.velocity_range

    # state: (x, v) per car, leader first, then the n-1 gaps
    labels = []
    for i in range(n):
        tag = "lead" if i == 0 else f"f{i}"
        labels += [f"{tag}_position", f"{tag}_velocity"]
    gap_labels = tuple("gap" if n == 2 else f"gap_{i}" for i in range(1, n))
    labels += list(gap_labels)

    def increment(state, u_ctl, u_env, t, ops, events=None):
        accels = (u_env[0], *u_ctl)
        new_vs = []
        deltas = []
        for i in range(n):
            v = state[2 * i + 1]
            v_new = ops.clamp(v + (accels[i] - drag) * dt, v_lo, v_hi)
            new_vs.append(v_new)
            dx = v_new * dt if semi else v * dt
            deltas += [dx, v_new - v]
        for i in range(1, n):
            if semi:
                deltas.append((new_vs[i - 1] - new_vs[i]) * dt)
            else:
                deltas.append((state[2 * (i - 1) + 1] - state[2 * i + 1]) * dt)
        return tuple(deltas)

    def obs_ctl(state, ops):
        # per follower: front-car speed, own speed, own gap
        out = []
        for i in range(1, n):
            out += [state[2 * (i - 1) + 1], state[2 * i + 1], state[2 * n + i - 1]]
        return tuple(out)

    def obs_env(state, ops):
        return (state[1], state[3], state[2 * n])

    def monitored(state, ops):
        return tuple(state[2 * n:])

    return SystemModel(
        name="platoon_basic" if n == 2 else f"platoon_chain_{n}",
        state_labels=tuple(labels),
        monitored_labels=gap_labels,
        action_space_ctl=((-p.accel_limit, p.accel_limit),) * (n - 1),
        action_space_env=((-p.accel_limit, p.accel_limit),),
        increment=increment,
        obs_ctl=obs_ctl,
        obs_env=obs_env,
        monitored=monitored,
        dt=dt,
    )


# ---------------------------------------------------------------------------
# Energy mode


def build_platoon_energy(vp: VehicleParams = VehicleParams()) -> SystemModel:
    dt = vp.dt
    semi = vp.integrator == "semi_implicit"
    v_lo, v_hi = vp.velocity_range
    m_r = vp.mass * vp.wheel_radius
    roll = vp.rolling_coeff * vp.gravity
    aero = 0.5 * vp.air_density * vp.drag_coeff * vp.frontal_area / vp.mass
    cap = vp.motor_speed_cap

    def car_accel(v, t_motor, t_brake, ops, events, tag, step_t):
        omega = motor_speed(vp, v)
        if ops.value(omega) > cap:
            # motor can no longer push; mechanical brake still works
            t_motor = ops.const(0.0)
            if events is not None:
                events.append((step_t, f"torque_cap:{tag}"))
        t_wheel = t_motor * vp.gear_ratio + t_brake
        accel = t_wheel / m_r - roll * v - aero * v * v
        return accel, t_motor, omega

    def increment(state, u_ctl, u_env, t, ops, events=None):
        _, v_l, _, v_f, _, e = state
        a_l, _, _ = car_accel(v_l, u_env[0], u_env[1], ops, events, "lead", t)
        a_f, tm_f, omega_f = car_accel(v_f, u_ctl[0], u_ctl[1], ops, events,
                                       "follower", t)
        vl_new = ops.clamp(v_l + a_l * dt, v_lo, v_hi)
        vf_new = ops.clamp(v_f + a_f * dt, v_lo, v_hi)
        eta = efficiency_map(vp, tm_f, omega_f, ops)
        power = motor_power(tm_f, omega_f, eta, ops)
        e_new = ops.maximum(e + power * dt, ops.const(0.0))
        if semi:
            dx_l, dx_f = vl_new * dt, vf_new * dt
            dgap = (vl_new - vf_new) * dt
        else:
            dx_l, dx_f = v_l * dt, v_f * dt
            dgap = (v_l - v_f) * dt
        return (dx_l, vl_new - v_l, dx_f, vf_new - v_f, dgap, e_new - e)

    def obs(state, ops):
        return (state[1], state[3], state[4])

    def monitored(state, ops):
        return (state[4], state[5])

    torque_space = ((-vp.motor_torque_max, vp.motor_torque_max),
                    (-vp.brake_torque_max, 0.0))
    return SystemModel(
        name="platoon_energy",
        state_labels=("lead_position", "lead_velocity", "follower_position",
                      "follower_velocity", "gap", "energy"),
        monitored_labels=("gap", "energy"),
        action_space_ctl=torque_space,
        action_space_env=torque_space,
        increment=increment,
        obs_ctl=obs,
        obs_env=obs,
        monitored=monitored,
        dt=dt,
    )


# ---------------------------------------------------------------------------
# Requirements and initial states

DEFAULT_GAP_BOUNDS = (1.0, 10.0)
DEFAULT_ENERGY_BUDGET = 30_000.0      # J per evaluation window


def _energy_rebase(states, ops):
    # energy is a per-window budget: measure it from the window head
    base = states[0][1]
    return [(s[0], s[1] - base) for s in states]


def platoon_requirements(window: int, mode: str = "basic",
                         alpha: float = 0.98,
                         gap_bounds=DEFAULT_GAP_BOUNDS,
                         energy_budget: float = DEFAULT_ENERGY_BUDGET,
                         cars: int = 2) -> RequirementSet:
    """Gap box per follower; in energy mode also a per-window energy cap.

    Energy mode weighs the gap requirement by ``alpha`` and the energy
    budget by ``1 - alpha``; atom margins are scaled by box half-width
    and budget respectively so the two scores are commensurate.
    """
    span = window - 1
    if mode == "basic":
        gaps = cars - 1
        if gaps == 1:
            items = [(Globally(0, span, box_formula(0, *gap_bounds)), 1.0, "gap")]
        else:
            w = 1.0 / gaps
            items = [(Globally(0, span, box_formula(i, *gap_bounds)), w,
                      f"gap_{i + 1}") for i in range(gaps)]
        return RequirementSet(items, window=window)
    if mode == "energy":
        if not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must lie strictly inside (0, 1), got {alpha}")
        keep_gap = Globally(0, span, box_formula(0, *gap_bounds))
        budget = Globally(0, span, upper_bound_atom(
            1, energy_budget, scale=energy_budget, label="energy_budget"))
        return RequirementSet(
            [(keep_gap, alpha, "gap"), (budget, 1.0 - alpha, "energy")],
            window=window,
            window_transform=_energy_rebase,
        )
    raise ValueError(f"unknown platoon mode {mode!r}")


DEFAULT_PLATOON_INIT = {
    "gap": (2.0, 6.0),
    "velocity": (15.0, 20.0),
}


def platoon_initial_sampler(mode: str = "basic", init: dict | None = None,
                            cars: int = 2):
    """Uniform gaps and velocities; the last car sits at the origin."""
    cfg = dict(DEFAULT_PLATOON_INIT)
    if init:
        cfg.update(init)
    energy = mode == "energy"
    if energy and cars != 2:
        raise ValueError("energy mode supports exactly two cars")

    def sample(rng):
        vs = [float(rng.uniform(*cfg["velocity"])) for _ in range(cars)]
        gaps = [float(rng.uniform(*cfg["gap"])) for _ in range(cars - 1)]
        xs = [0.0] * cars
        for i in range(cars - 2, -1, -1):
            xs[i] = xs[i + 1] + gaps[i]
        state = []
        for x, v in zip(xs, vs):
            state += [x, v]
        state += gaps
        if energy:
            state.append(0.0)
        return tuple(state)

    return sample
