"""Command line front end.

Verbs:

* ``train``    run the adversarial game and write weights plus logs
* ``test``     score a controller on a fresh set of random episodes
* ``rollout``  simulate one episode and dump it as CSV
* ``compare``  paired evaluation of a trained controller vs a baseline

Exit codes: 0 on success, 2 for usage or configuration problems, 3 when
the numerics break down (divergent training, non-finite states).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .autodiff import FLOAT_OPS
from .config import (ConfigError, ResolvedConfig, derive_rng, derive_seedseq,
                     load_config, preset_config, resolve_config, PRESETS)
from .persist import (WeightFormatError, load_weights, save_weights,
                      write_compare_csv, write_history_csv,
                      write_rollout_csv, write_summary_json,
                      write_testset_csv)
from .policy import ReplayPolicy
from .sim import GaussianNoise, SimulationError, rollout
from .systems.baselines import AngleSlidingMode, DistancePid
from .train import (TrainingAbort, evaluate_testset, global_scores,
                    paired_compare, train)

__all__ = ["main"]

log = logging.getLogger("advctrl")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--config", metavar="FILE",
                       help="JSON configuration file")
    group.add_argument("--preset", choices=sorted(PRESETS),
                       help="bundled configuration")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the configuration seed")


def _resolve(args) -> ResolvedConfig:
    cfg = preset_config(args.preset) if args.preset else load_config(args.config)
    return resolve_config(cfg, seed=args.seed)


def _neutral_env(model, steps: int) -> ReplayPolicy:
    # least-action environment: every component as close to zero as the
    # action interval allows
    action = tuple(min(max(0.0, lo), hi) for lo, hi in model.action_space_env)
    return ReplayPolicy([action] * max(steps, 1))


def _baseline(resolved: ResolvedConfig, name: str):
    if name == "smc":
        if resolved.system != "cartpole":
            raise ConfigError("the smc baseline balances the cart-pole only")
        return AngleSlidingMode()
    if name == "pid":
        if resolved.system == "platoon_basic":
            if resolved.params.cars != 2:
                raise ConfigError("the pid baseline drives a single follower; "
                                  "use a two-car platoon")
            lo, hi = resolved.effective["bounds"]["gap"]
            return DistancePid(target=(lo + hi) / 2.0, dt=resolved.model.dt,
                               out_limit=resolved.params.accel_limit)
        if resolved.system == "platoon_energy":
            lo, hi = resolved.effective["bounds"]["gap"]
            return DistancePid(target=(lo + hi) / 2.0, dt=resolved.model.dt,
                               vehicle=resolved.params)
        raise ConfigError("the pid baseline drives the platoon systems only")
    raise ConfigError(f"unknown baseline {name!r}")


def _load_policy(resolved: ResolvedConfig, path: str, role: str, factory):
    loaded = load_weights(path, expect_config_hash=resolved.config_hash)
    if loaded.role and loaded.role != role:
        raise WeightFormatError(
            f"{path} holds {loaded.role} weights, expected {role}")
    return factory(loaded.theta, FLOAT_OPS)


def _defender_from_args(resolved: ResolvedConfig, args):
    if getattr(args, "defender_weights", None):
        return _load_policy(resolved, args.defender_weights, "defender",
                            resolved.def_factory), "trained"
    if getattr(args, "baseline", None):
        return _baseline(resolved, args.baseline), args.baseline
    raise ConfigError("pass --defender-weights or --baseline")


def _environment_from_args(resolved: ResolvedConfig, args, steps: int):
    """Returns (attacker policy, mode string)."""
    mode = getattr(args, "mode", None) or (
        "adversarial" if getattr(args, "attacker_weights", None)
        else resolved.test_mode)
    if mode == "adversarial":
        if not getattr(args, "attacker_weights", None):
            raise ConfigError(
                "adversarial mode needs --attacker-weights "
                "(or pass --mode fixed)")
        return _load_policy(resolved, args.attacker_weights, "attacker",
                            resolved.atk_factory), mode
    return _neutral_env(resolved.model, steps), mode


def _print_report(report, heading: str) -> None:
    print(heading)
    for label in report.labels:
        print(f"  {label}: fraction_positive={report.fraction_positive[label]!r} "
              f"min={report.min_score[label]!r} "
              f"mean={report.mean_score[label]!r}")
    if report.errors:
        print(f"  divergent episodes: {report.errors}")


# ---------------------------------------------------------------------------
# Verbs


def _cmd_train(args) -> int:
    resolved = _resolve(args)
    seed = resolved.seed
    out = args.out or f"run_{resolved.system}_seed{seed}"
    os.makedirs(out, exist_ok=True)
    result = train(
        resolved.model, resolved.reqs, resolved.atk_spec, resolved.def_spec,
        resolved.train, resolved.sampler,
        rng_init_attacker=derive_rng(seed, "init_attacker"),
        rng_init_defender=derive_rng(seed, "init_defender"),
        rng_sampler=derive_rng(seed, "sampler"),
        rng_noise=derive_rng(seed, "noise"),
        atk_factory=resolved.atk_factory,
        def_factory=resolved.def_factory,
    )
    save_weights(os.path.join(out, "attacker.json"), resolved.atk_spec,
                 result.theta_attacker, "attacker", resolved.config_hash, seed)
    save_weights(os.path.join(out, "defender.json"), resolved.def_spec,
                 result.theta_defender, "defender", resolved.config_hash, seed)
    write_history_csv(os.path.join(out, "history.csv"), result.history)
    with open(os.path.join(out, "config.json"), "w", encoding="utf-8") as fh:
        json.dump(resolved.effective, fh, sort_keys=True, indent=2)
        fh.write("\n")
    last = {}
    for iteration, phase, value, _ in result.history:
        last[phase] = value
    summary = {
        "system": resolved.system,
        "seed": seed,
        "config_hash": resolved.config_hash,
        "iterations": resolved.train.iterations,
        "updates": len(result.history),
        "final_objective": last,
    }
    write_summary_json(os.path.join(out, "summary.json"), summary)
    print(f"trained {resolved.system} (seed {seed}, "
          f"{resolved.train.iterations} iterations) -> {out}")
    return 0


def _cmd_test(args) -> int:
    resolved = _resolve(args)
    seed = resolved.seed
    n = args.n or resolved.test_samples
    steps = args.horizon or resolved.test_horizon
    defender, defender_kind = _defender_from_args(resolved, args)
    attacker, mode = _environment_from_args(resolved, args, steps)
    report = evaluate_testset(
        resolved.model, defender, attacker, resolved.reqs, n, steps,
        derive_seedseq(seed, "testset"), resolved.sampler)
    _print_report(report, f"{resolved.system} {defender_kind} defender, "
                          f"{mode} environment, {n} episodes x {steps} steps")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_testset_csv(os.path.join(args.out, "testset.csv"),
                          report.labels, report.rows)
        summary = report.summary_dict()
        summary.update({"system": resolved.system, "seed": seed,
                        "mode": mode, "steps": steps,
                        "defender": defender_kind,
                        "config_hash": resolved.config_hash})
        write_summary_json(os.path.join(args.out, "summary.json"), summary)
    return 0


def _cmd_rollout(args) -> int:
    resolved = _resolve(args)
    seed = resolved.seed
    steps = args.horizon or resolved.test_horizon
    defender, _ = _defender_from_args(resolved, args)
    attacker, mode = _environment_from_args(resolved, args, steps)
    if args.s0:
        try:
            s0 = tuple(float(v) for v in args.s0.split(","))
        except ValueError as exc:
            raise ConfigError(f"--s0 must be comma-separated floats: {exc}")
        expected = len(resolved.model.state_labels)
        if len(s0) != expected:
            raise ConfigError(
                f"--s0 needs {expected} values "
                f"({', '.join(resolved.model.state_labels)}), got {len(s0)}")
    else:
        s0 = resolved.sampler(derive_rng(seed, "rollout"))
    noise = GaussianNoise(derive_rng(seed, "rollout_noise"))
    record = rollout(resolved.model, s0, defender, attacker, steps, noise)
    out = args.out or "rollout.csv"
    write_rollout_csv(out, resolved.model, record, resolved.reqs)
    scores = global_scores(resolved.reqs, record.trajectory)
    print(f"rollout of {steps} steps ({mode} environment) -> {out}")
    for label, score in scores.items():
        print(f"  {label}: robustness={score!r}")
    if record.events:
        print(f"  events: {len(record.events)}")
    return 0


def _cmd_compare(args) -> int:
    resolved = _resolve(args)
    seed = resolved.seed
    n = args.n or resolved.test_samples
    steps = args.horizon or resolved.test_horizon
    if not args.defender_weights:
        raise ConfigError("compare needs --defender-weights for the candidate")
    candidate = _load_policy(resolved, args.defender_weights, "defender",
                             resolved.def_factory)
    baseline_name = args.baseline or (
        "smc" if resolved.system == "cartpole" else "pid")
    baseline = _baseline(resolved, baseline_name)
    attacker, mode = _environment_from_args(resolved, args, steps)
    report_a, report_b, hashes = paired_compare(
        resolved.model, candidate, baseline, attacker, resolved.reqs, n,
        steps, derive_seedseq(seed, "compare"), resolved.sampler)
    _print_report(report_a, f"trained defender ({mode} environment, "
                            f"{n} episodes x {steps} steps)")
    _print_report(report_b, f"{baseline_name} baseline (same episodes)")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_compare_csv(os.path.join(args.out, "compare.csv"),
                          report_a.labels, hashes, report_a.rows,
                          report_b.rows, "trained", baseline_name)
        summary = {
            "system": resolved.system,
            "seed": seed,
            "mode": mode,
            "steps": steps,
            "samples": n,
            "baseline": baseline_name,
            "config_hash": resolved.config_hash,
            "trained": report_a.summary_dict(),
            baseline_name: report_b.summary_dict(),
        }
        write_summary_json(os.path.join(args.out, "summary.json"), summary)
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="advctrl",
        description="Adversarial synthesis of safe controllers against "
                    "signal temporal logic requirements.")
    sub = parser.add_subparsers(dest="verb", required=True)

    p_train = sub.add_parser("train", help="run the attacker/defender game")
    _add_config_flags(p_train)
    p_train.add_argument("--out", metavar="DIR",
                         help="output directory (default run_<system>_seed<seed>)")
    p_train.set_defaults(func=_cmd_train)

    p_test = sub.add_parser("test", help="evaluate a controller on random episodes")
    _add_config_flags(p_test)
    ctl = p_test.add_mutually_exclusive_group(required=True)
    ctl.add_argument("--defender-weights", metavar="FILE")
    ctl.add_argument("--baseline", choices=("smc", "pid"),
                     help="evaluate a classical controller instead of weights")
    p_test.add_argument("--attacker-weights", metavar="FILE")
    p_test.add_argument("--mode", choices=("adversarial", "fixed"))
    p_test.add_argument("--n", type=int, help="number of episodes")
    p_test.add_argument("--horizon", type=int, help="steps per episode")
    p_test.add_argument("--out", metavar="DIR")
    p_test.set_defaults(func=_cmd_test)

    p_roll = sub.add_parser("rollout", help="simulate one episode to CSV")
    _add_config_flags(p_roll)
    rctl = p_roll.add_mutually_exclusive_group(required=True)
    rctl.add_argument("--defender-weights", metavar="FILE")
    rctl.add_argument("--baseline", choices=("smc", "pid"))
    p_roll.add_argument("--attacker-weights", metavar="FILE")
    p_roll.add_argument("--mode", choices=("adversarial", "fixed"))
    p_roll.add_argument("--horizon", type=int, help="steps to simulate")
    p_roll.add_argument("--s0", metavar="V1,V2,...",
                        help="initial state (default: sampled)")
    p_roll.add_argument("--out", metavar="FILE", help="CSV path")
    p_roll.set_defaults(func=_cmd_rollout)

    p_cmp = sub.add_parser("compare",
                           help="paired trained-vs-baseline evaluation")
    _add_config_flags(p_cmp)
    p_cmp.add_argument("--defender-weights", metavar="FILE", required=True)
    p_cmp.add_argument("--attacker-weights", metavar="FILE")
    p_cmp.add_argument("--baseline", choices=("smc", "pid"),
                       help="default: smc for the cart-pole, pid otherwise")
    p_cmp.add_argument("--mode", choices=("adversarial", "fixed"))
    p_cmp.add_argument("--n", type=int, help="number of paired episodes")
    p_cmp.add_argument("--horizon", type=int, help="steps per episode")
    p_cmp.add_argument("--out", metavar="DIR")
    p_cmp.set_defaults(func=_cmd_compare)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, WeightFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TrainingAbort, SimulationError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
