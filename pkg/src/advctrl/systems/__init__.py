"""Concrete plants and classical baseline controllers.

Two case studies share the simulator contract: a cart-pole whose
controller balances the pole while shadowing a moving target against an
adversary that picks the cart friction and drags the target, and a
vehicle platoon whose follower(s) hold a safe gap behind an adversarial
leader, in a basic acceleration-driven mode and an energy-accounting
powertrain mode.
"""

from .cartpole import (
    CartPoleParams,
    cartpole_accelerations,
    build_cartpole,
    cartpole_requirements,
    cartpole_initial_sampler,
)
from .platoon import (
    PlatoonParams,
    VehicleParams,
    EfficiencyParams,
    efficiency_map,
    motor_power,
    motor_speed,
    build_platoon_basic,
    build_platoon_energy,
    platoon_requirements,
    platoon_initial_sampler,
)
from .baselines import AngleSlidingMode, DistancePid

__all__ = [
    "CartPoleParams",
    "cartpole_accelerations",
    "build_cartpole",
    "cartpole_requirements",
    "cartpole_initial_sampler",
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
    "AngleSlidingMode",
    "DistancePid",
]
