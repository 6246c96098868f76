"""Alternating gradient training of the attacker/defender game.

Both players optimize the same scalar objective: the sum, over every
full requirement window that fits in one training rollout, of the
combined robustness of the requirement set.  The attacker descends it,
the defender ascends it.  Each outer iteration samples one initial
state, then performs the configured number of attacker updates followed
by defender updates; every update replays a fresh stochastic rollout
from that initial state through the autodiff tape and applies one Adam
step to its own parameters, with the opponent frozen.

Testing runs plain (tape-free) rollouts over a longer horizon and
scores each requirement globally: the formula must hold at every step
it fits in the trajectory, which for box requirements equals the worst
atom margin along the whole run.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import FLOAT_OPS, Tape, TapeOps
from .policy import MlpPolicy, MlpSpec, init_params
from .sim import (FixedNoise, GaussianNoise, SimulationError, SystemModel,
                  rollout, rollout_diff)
from .stl import RequirementSet, _combined, globalize, robustness, verdict

__all__ = [
    "TrainingAbort",
    "TrainConfig",
    "TrainResult",
    "objective",
    "objective_value",
    "objective_gradients",
    "policy_factory",
    "train",
    "TestRow",
    "TestReport",
    "test_rollout",
    "evaluate_testset",
    "paired_compare",
]

log = logging.getLogger(__name__)


class TrainingAbort(RuntimeError):
    """Training hit a non-recoverable numeric failure."""


@dataclass(frozen=True)
class TrainConfig:
    """Knobs of the alternating optimization."""

    horizon: int = 40                 # states per training rollout
    iterations: int = 500             # outer iterations
    attacker_steps: int = 1           # attacker updates per iteration
    defender_steps: int = 2           # defender updates per iteration
    lr_attacker: float = 1e-3
    lr_defender: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    grad_clip: float = 10.0           # global-norm gradient clip
    resample_retries: int = 10        # divergent-rollout retries per iteration

    def __post_init__(self):
        if self.horizon < 2:
            raise ValueError("training horizon must cover at least two states")
        if self.iterations < 0 or self.attacker_steps < 0 or self.defender_steps < 0:
            raise ValueError("iteration counts must be non-negative")
        if self.lr_attacker <= 0 or self.lr_defender <= 0:
            raise ValueError("learning rates must be positive")
        if self.grad_clip <= 0:
            raise ValueError("gradient clip must be positive")


class Adam:
    """Standard Adam; ``step`` returns the updated parameter vector."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = None
        self.v = None
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _clip(grad: np.ndarray, limit: float) -> tuple[np.ndarray, float]:
    norm = float(np.linalg.norm(grad))
    if norm > limit:
        grad = grad * (limit / norm)
    return grad, norm


# ---------------------------------------------------------------------------
# Objective


def objective(model: SystemModel, s0, defender, attacker, horizon: int,
              reqs: RequirementSet, noise_source, ops=FLOAT_OPS):
    """Sum of combined window scores over one closed-loop rollout.

    The rollout produces exactly ``horizon`` states; every contiguous
    window of ``reqs.window`` states contributes one combined score, so
    ``horizon == reqs.window`` degenerates to a single window.  Returns
    ``(value, record)``.
    """
    if horizon < reqs.window:
        raise ValueError(
            f"horizon {horizon} cannot fit requirement window {reqs.window}")
    if ops is FLOAT_OPS:
        record = rollout(model, s0, defender, attacker, horizon - 1, noise_source)
    else:
        record = rollout_diff(model, s0, defender, attacker, horizon - 1,
                              noise_source, ops.tape)
    states = record.trajectory.states
    total = None
    for t in range(horizon - reqs.window + 1):
        term = _combined(reqs, states, t, ops)
        total = term if total is None else total + term
    return total, record


def objective_value(model, s0, defender, attacker, horizon, reqs,
                    noise_source) -> float:
    """Plain-float objective; bit-identical to the tape forward value."""
    value, _ = objective(model, s0, defender, attacker, horizon, reqs,
                         noise_source, FLOAT_OPS)
    return value


def policy_factory(spec: MlpSpec):
    """Default factory: one plain network over the full observation."""
    return lambda theta, ops: MlpPolicy(spec, theta, ops)


def objective_gradients(model: SystemModel, reqs: RequirementSet, horizon: int,
                        s0, atk_factory, def_factory,
                        theta_atk: np.ndarray, theta_def: np.ndarray,
                        noise_source):
    """One recorded rollout; returns the objective value, the gradients
    for both parameter vectors, the rollout record and the tape.

    ``atk_factory(theta, ops)`` and ``def_factory(theta, ops)`` build the
    policies; see :func:`policy_factory` for the plain-network case.
    """
    tape = Tape()
    ops = TapeOps(tape)
    nodes_atk = tape.inputs(np.asarray(theta_atk, dtype=float).tolist())
    nodes_def = tape.inputs(np.asarray(theta_def, dtype=float).tolist())
    attacker = atk_factory(nodes_atk, ops)
    defender = def_factory(nodes_def, ops)
    value, record = objective(model, s0, defender, attacker, horizon, reqs,
                              noise_source, ops)
    grad = tape.backward(value)
    g_atk = np.fromiter((grad.wrt(n) for n in nodes_atk), float,
                        count=len(nodes_atk))
    g_def = np.fromiter((grad.wrt(n) for n in nodes_def), float,
                        count=len(nodes_def))
    return value.value, g_atk, g_def, record, tape


# ---------------------------------------------------------------------------
# Training loop


@dataclass
class TrainResult:
    theta_attacker: np.ndarray
    theta_defender: np.ndarray
    history: list = field(default_factory=list)   # (iteration, phase, J, grad_norm)


def train(model: SystemModel, reqs: RequirementSet, atk_spec: MlpSpec,
          def_spec: MlpSpec, cfg: TrainConfig, sampler,
          rng_init_attacker: np.random.Generator,
          rng_init_defender: np.random.Generator,
          rng_sampler: np.random.Generator,
          rng_noise: np.random.Generator,
          atk_factory=None, def_factory=None) -> TrainResult:
    """Alternating minimize/maximize loop over the shared objective."""
    if atk_factory is None:
        atk_factory = policy_factory(atk_spec)
    if def_factory is None:
        def_factory = policy_factory(def_spec)
    theta_atk = init_params(atk_spec, rng_init_attacker)
    theta_def = init_params(def_spec, rng_init_defender)
    adam_atk = Adam(cfg.lr_attacker, cfg.adam_beta1, cfg.adam_beta2,
                    cfg.adam_eps)
    adam_def = Adam(cfg.lr_defender, cfg.adam_beta1, cfg.adam_beta2,
                    cfg.adam_eps)
    history: list = []
    noise = GaussianNoise(rng_noise)

    def one_update(iteration, s0, phase):
        nonlocal theta_atk, theta_def
        for attempt in range(cfg.resample_retries + 1):
            try:
                value, g_atk, g_def, _, _ = objective_gradients(
                    model, reqs, cfg.horizon, s0, atk_factory, def_factory,
                    theta_atk, theta_def, noise)
            except SimulationError as exc:
                log.warning("iteration %d: divergent rollout (%s); resampling",
                            iteration, exc)
                s0 = sampler(rng_sampler)
                continue
            grad = g_atk if phase == "attacker" else g_def
            if not np.all(np.isfinite(grad)):
                raise TrainingAbort(
                    f"non-finite gradient in {phase} update at iteration "
                    f"{iteration}")
            grad, norm = _clip(grad, cfg.grad_clip)
            if phase == "attacker":
                theta_atk = adam_atk.step(theta_atk, grad)       # descent
            else:
                theta_def = adam_def.step(theta_def, -grad)      # ascent
            history.append((iteration, phase, value, norm))
            return s0
        raise TrainingAbort(
            f"iteration {iteration}: rollout still divergent after "
            f"{cfg.resample_retries} resamples")

    for iteration in range(cfg.iterations):
        s0 = sampler(rng_sampler)
        for _ in range(cfg.attacker_steps):
            s0 = one_update(iteration, s0, "attacker")
        for _ in range(cfg.defender_steps):
            s0 = one_update(iteration, s0, "defender")
    return TrainResult(theta_atk, theta_def, history)


# ---------------------------------------------------------------------------
# Testing


@dataclass
class TestRow:
    initial_state: tuple
    scores: dict          # requirement label -> global robustness
    satisfied: dict       # label -> score strictly positive
    boundary: dict        # label -> score exactly zero
    events: int = 0
    error: str | None = None


@dataclass
class TestReport:
    labels: tuple
    rows: list
    n: int
    errors: int
    fraction_positive: dict
    min_score: dict
    mean_score: dict

    def summary_dict(self) -> dict:
        per = {}
        for label in self.labels:
            per[label] = {
                "fraction_positive": self.fraction_positive[label],
                "min_robustness": self.min_score[label],
                "mean_robustness": self.mean_score[label],
            }
        return {"samples": self.n, "errors": self.errors, "requirements": per}


def global_scores(reqs: RequirementSet, trajectory) -> dict:
    """Whole-trajectory robustness of each requirement."""
    states = list(trajectory.states)
    if reqs.window_transform is not None:
        states = reqs.window_transform(states, FLOAT_OPS)
    out = {}
    for phi, _, label in reqs.items:
        out[label] = robustness(globalize(phi, len(states)), states, 0)
    return out


def test_rollout(model: SystemModel, defender, attacker, reqs, s0, steps: int,
                 noise_source) -> TestRow:
    """One evaluation rollout scored globally per requirement."""
    record = rollout(model, s0, defender, attacker, steps, noise_source)
    scores = global_scores(reqs, record.trajectory)
    sat, edge = {}, {}
    for label, score in scores.items():
        sat[label], edge[label] = verdict(score)
    return TestRow(tuple(s0), scores, sat, edge, events=len(record.events))


def _aggregate(labels, rows, n) -> TestReport:
    errors = sum(1 for r in rows if r.error is not None)
    frac, mins, means = {}, {}, {}
    for label in labels:
        vals = [r.scores[label] for r in rows if r.error is None]
        pos = sum(1 for r in rows if r.error is None and r.satisfied[label])
        frac[label] = pos / n if n else math.nan
        mins[label] = min(vals) if vals else math.nan
        means[label] = sum(vals) / len(vals) if vals else math.nan
    return TestReport(tuple(labels), rows, n, errors, frac, mins, means)


def _reset(policy):
    reset = getattr(policy, "reset", None)
    if reset is not None:
        reset()


def evaluate_testset(model: SystemModel, defender, attacker,
                     reqs: RequirementSet, n: int, steps: int,
                     seed_seq: np.random.SeedSequence, sampler) -> TestReport:
    """Score n independent rollouts; per-sample streams are derived from
    ``seed_seq`` by index, so results do not depend on evaluation order.

    Divergent rollouts are recorded as failed rows (counted as not
    satisfied), not raised.
    """
    rows = []
    for child in seed_seq.spawn(n):
        rng = np.random.Generator(np.random.PCG64(child))
        s0 = sampler(rng)
        _reset(defender)
        _reset(attacker)
        try:
            row = test_rollout(model, defender, attacker, reqs, s0, steps,
                               GaussianNoise(rng))
        except SimulationError as exc:
            row = TestRow(tuple(s0),
                          {label: math.nan for label in reqs.labels},
                          {label: False for label in reqs.labels},
                          {label: False for label in reqs.labels},
                          error=str(exc))
        rows.append(row)
    return _aggregate(reqs.labels, rows, n)


def _pair_hash(s0, noise) -> str:
    payload = np.asarray(s0, dtype=np.float64).tobytes()
    block = np.asarray(noise, dtype=np.float64)
    if block.size:
        payload += block.tobytes()
    return hashlib.sha256(payload).hexdigest()[:16]


def paired_compare(model: SystemModel, defender_a, defender_b, attacker,
                   reqs: RequirementSet, n: int, steps: int,
                   seed_seq: np.random.SeedSequence, sampler):
    """Evaluate two controllers on identical initial states and noise.

    Returns ``(report_a, report_b, pair_hashes)``; the hash of each
    sample's inputs is shared by both arms by construction, and rows are
    index-aligned.
    """
    rows_a, rows_b, hashes = [], [], []
    for child in seed_seq.spawn(n):
        rng = np.random.Generator(np.random.PCG64(child))
        s0 = sampler(rng)
        noise_block = GaussianNoise(rng).sample(steps, attacker.noise_dim)
        hashes.append(_pair_hash(s0, noise_block))
        for defender, rows in ((defender_a, rows_a), (defender_b, rows_b)):
            _reset(defender)
            _reset(attacker)
            try:
                row = test_rollout(model, defender, attacker, reqs, s0, steps,
                                   FixedNoise(noise_block))
            except SimulationError as exc:
                row = TestRow(tuple(s0),
                              {label: math.nan for label in reqs.labels},
                              {label: False for label in reqs.labels},
                              {label: False for label in reqs.labels},
                              error=str(exc))
            rows.append(row)
    return (_aggregate(reqs.labels, rows_a, n),
            _aggregate(reqs.labels, rows_b, n), hashes)
