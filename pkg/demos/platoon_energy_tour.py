# Longitudinal platooning with an electric powertrain.
#
# Two vehicles drive in a line. The leader (the adversary) and the
# follower (the controller) each command a motor torque and a brake
# torque; the follower must keep the inter-vehicle gap inside a box
# while staying under an energy budget measured per requirement window.

import numpy as np

from advctrl import (FLOAT_OPS, DistancePid, GaussianNoise, VehicleParams,
                     build_platoon_energy, efficiency_map, motor_power,
                     motor_speed, platoon_initial_sampler,
                     platoon_requirements, rollout)
from advctrl.train import global_scores

vp = VehicleParams()
model = build_platoon_energy(vp)

# -- The powertrain in numbers -----------------------------------------

print("motor speed cap:", round(vp.motor_speed_cap, 2), "rad/s",
      f"(reached at {vp.motor_speed_cap * vp.wheel_radius / vp.gear_ratio:.1f} m/s)")

v = 20.0
omega = motor_speed(vp, v)
print(f"at {v} m/s the motor turns at {omega:.1f} rad/s")

# Efficiency peaks at a sweet spot of torque and speed and falls toward
# the map edges; the same map discounts traction power and regen power.
for torque in (30.0, 108.0, 170.0):
    eta = efficiency_map(vp, torque, omega)
    drawn = motor_power(torque, omega, eta)
    regen = motor_power(-torque, omega, eta)
    print(f"  torque {torque:6.1f} N*m: efficiency {eta:.3f}, "
          f"drive {drawn:8.1f} W, regen {regen:8.1f} W")

# -- A PID follower with energy accounting -----------------------------

sampler = platoon_initial_sampler("energy")
rng = np.random.default_rng(5)
s0 = sampler(rng)
print("initial state (x_l, v_l, x_f, v_f, gap, energy):",
      [round(s, 2) for s in s0])

pid = DistancePid(target=5.5, dt=vp.dt, vehicle=vp)


class Cruise:
    """Leader holding roughly constant speed."""

    noise_dim = 0

    def act(self, obs, noise=(), step=0):
        return (40.0, 0.0)


record = rollout(model, s0, pid, Cruise(), 400, GaussianNoise(rng))
gaps = [s[4] for s in record.states]
energy = [s[5] for s in record.states]
print("gap range over 20 s:", round(min(gaps), 2), "to", round(max(gaps), 2), "m")
print("energy drawn:", round(energy[-1] - energy[0], 1), "J")

# -- Scoring the run against the requirements --------------------------
#
# The energy requirement is measured per window, restarting the meter at
# each window head, so a long trajectory is judged on its worst window
# rather than its lifetime total.

reqs = platoon_requirements(window=10, mode="energy")
scores = global_scores(reqs, record.trajectory)
for label, score in scores.items():
    print(f"  {label}: whole-run margin {score:.3f} "
          f"({'satisfied' if score > 0 else 'violated'})")
