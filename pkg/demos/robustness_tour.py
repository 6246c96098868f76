# Quantitative satisfaction of temporal requirements.
#
# A requirement is a formula over discrete-time state trajectories.
# Instead of a bare yes/no, the monitor returns a robustness margin:
# positive means satisfied with room to spare, negative means violated
# by that much. The margin is what the trainer differentiates.

from advctrl import (Eventually, Globally, RequirementSet, Trajectory,
                     box_formula, combined_robustness, globalize,
                     lower_bound_atom, robustness, satisfies, temporal_depth,
                     verdict)

# -- A signal and a box requirement ------------------------------------

# a scalar signal sampled at 10 Hz, drifting up and back
values = [0.0, 0.4, 0.9, 1.4, 1.8, 1.5, 1.1, 0.6, 0.2, 0.0]
traj = Trajectory([(v,) for v in values], dt=0.1)

keep_low = box_formula(0, -2.0, 2.0)   # stay inside [-2, 2], scaled margins
print("margin at t=0:", robustness(keep_low, traj, 0))
print("margin at t=4:", robustness(keep_low, traj, 4), "(closest approach)")

# -- Temporal operators ------------------------------------------------

# "within the next 3 samples the signal exceeds 1"
soon_high = Eventually(0, 3, lower_bound_atom(0, 1.0))
print("eventually-high at t=0:", robustness(soon_high, traj, 0))
print("boolean check agrees:", satisfies(soon_high, traj, 0))

# "for the next 5 samples the signal stays below 2"
stay_low = Globally(0, 5, box_formula(0, -2.0, 2.0))
print("globally-low at t=0:", robustness(stay_low, traj, 0))

# Windows are strict: a formula looking 5 steps ahead cannot be asked
# about the last state. temporal_depth() says how much future is needed.
print("depth of the nested formula:", temporal_depth(Globally(0, 5, soon_high)))

# -- Whole-trajectory verdicts -----------------------------------------

# globalize() pins a formula over every step the trajectory can support,
# so one number summarizes the full run.
whole = globalize(keep_low, len(traj))
score = robustness(whole, traj, 0)
sat, boundary = verdict(score)
print("whole-run margin:", score, "satisfied:", sat, "boundary case:", boundary)

# -- Weighted requirement sets -----------------------------------------
#
# Controllers juggle several requirements at once. A RequirementSet
# scores a fixed-length window with a weight-normalized sum, which keeps
# differently-scaled margins commensurate.

two_signals = Trajectory([(v, 0.3 * i) for i, v in enumerate(values)], dt=0.1)
reqs = RequirementSet([
    (Globally(0, 4, box_formula(0, -2.0, 2.0)), 0.7, "level"),
    (Globally(0, 4, box_formula(1, -1.0, 4.0)), 0.3, "ramp"),
], window=5)
print("combined window score at t=0:", combined_robustness(reqs, two_signals, 0))
print("combined window score at t=5:", combined_robustness(reqs, two_signals, 5))
