"""Adversarial synthesis of safe controllers.

The package pits two small neural policies against each other inside a
differentiable closed-loop simulator: a defender steering the system
and an attacker steering its environment.  Both optimize the same
scalar score, the robustness of a set of signal temporal logic
requirements evaluated over sliding windows of the trajectory, so
training the pair is a smooth minmax game whose gradients flow end to
end through the dynamics and the robustness monitor.

Layers, bottom up:

* :mod:`advctrl.autodiff`   scalar reverse-mode tape with the min/max
  selection semantics the robustness monitor needs
* :mod:`advctrl.stl`        formulas, robustness, requirement sets
* :mod:`advctrl.policy`     tiny multilayer perceptrons with squashed
  outputs, plus replay and shared-parameter wrappers
* :mod:`advctrl.sim`        discrete-time closed-loop rollouts, plain or
  recorded on the tape
* :mod:`advctrl.systems`    cart-pole and vehicle platoon models with
  their default requirements and classical baseline controllers
* :mod:`advctrl.train`      the alternating optimization, testing and
  paired comparison
* :mod:`advctrl.config`     JSON configurations, presets, seeds
* :mod:`advctrl.persist`    deterministic weight files and CSV reports
* :mod:`advctrl.cli`        the ``advctrl`` command
"""

from .autodiff import FLOAT_OPS, FloatOps, Gradient, Node, Tape, TapeOps
from .stl import (And, Atom, Eventually, Globally, Not, Or, RequirementSet,
                  Trajectory, TrueFormula, Until, WindowError, all_of,
                  box_formula, combined_robustness, combined_robustness_diff,
                  formula_from_dict, formula_to_dict, globalize,
                  lower_bound_atom, robustness, robustness_diff, satisfies,
                  temporal_depth, upper_bound_atom, verdict)
from .policy import (MlpPolicy, MlpSpec, ReplayPolicy, SharedDefender,
                     attacker_spec, defender_spec, init_params, mlp_forward)
from .sim import (FixedNoise, GaussianNoise, RolloutRecord, SimulationError,
                  SystemModel, clamp_action, rollout, rollout_diff, step)
from .train import (Adam, TestReport, TestRow, TrainConfig, TrainResult,
                    TrainingAbort, evaluate_testset, global_scores, objective,
                    objective_gradients, objective_value, paired_compare,
                    policy_factory, test_rollout, train)
from .config import (PRESETS, SCHEMA, ConfigError, ResolvedConfig,
                     config_hash, derive_rng, derive_seedseq, load_config,
                     preset_config, resolve_config, subseed, validate_config)
from .persist import (LoadedWeights, WeightFormatError, load_weights,
                      save_weights, write_compare_csv, write_history_csv,
                      write_rollout_csv, write_summary_json,
                      write_testset_csv)
from . import systems

__version__ = "0.1.0"

__all__ = [
    "FLOAT_OPS", "FloatOps", "Gradient", "Node", "Tape", "TapeOps",
    "And", "Atom", "Eventually", "Globally", "Not", "Or", "RequirementSet",
    "Trajectory", "TrueFormula", "Until", "WindowError", "all_of",
    "box_formula", "combined_robustness", "combined_robustness_diff",
    "formula_from_dict", "formula_to_dict", "globalize", "lower_bound_atom",
    "robustness", "robustness_diff", "satisfies", "temporal_depth",
    "upper_bound_atom", "verdict",
    "MlpPolicy", "MlpSpec", "ReplayPolicy", "SharedDefender", "attacker_spec",
    "defender_spec", "init_params", "mlp_forward",
    "FixedNoise", "GaussianNoise", "RolloutRecord", "SimulationError",
    "SystemModel", "clamp_action", "rollout", "rollout_diff", "step",
    "Adam", "TestReport", "TestRow", "TrainConfig", "TrainResult",
    "TrainingAbort", "evaluate_testset", "global_scores", "objective",
    "objective_gradients", "objective_value", "paired_compare",
    "policy_factory", "test_rollout", "train",
    "PRESETS", "SCHEMA", "ConfigError", "ResolvedConfig", "config_hash",
    "derive_rng", "derive_seedseq", "load_config", "preset_config",
    "resolve_config", "subseed", "validate_config",
    "LoadedWeights", "WeightFormatError", "load_weights", "save_weights",
    "write_compare_csv", "write_history_csv", "write_rollout_csv",
    "write_summary_json", "write_testset_csv",
    "systems",
    "__version__",
]
