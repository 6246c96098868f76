"""Discrete-time signal temporal logic: syntax, satisfaction, robustness.

Formulas are built from strictly-positive atom margins, negation,
conjunction/disjunction and the time-bounded ``until``;  ``eventually``
and ``globally`` are first-class but must agree with their derived
forms (``true until`` and double negation).  Semantics follow the usual
discrete recursion: an atom holds when its margin is positive, and
``left until[a,b] right`` holds at t when some step t' in [t+a, t+b]
satisfies ``right`` with ``left`` holding on all of [t, t'].

The quantitative counterpart replaces and/or with min/max, giving a
robustness score whose sign matches Boolean satisfaction and whose
magnitude bounds the uniform atom perturbation the verdict survives.
A score of exactly zero is reported as *not satisfied* together with a
boundary flag.

Evaluation over a window runs bottom-up across time indices so each
subformula is scored once per step; reductions are pure min/max picks,
so the result is bit-identical to the naive recursion.  The same code
path evaluates plain floats and autodiff nodes (see ``robustness_diff``).

Windows are strict: evaluating a formula whose temporal depth reaches
past the trajectory end raises :class:`WindowError` rather than
truncating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .autodiff import FLOAT_OPS, Tape, TapeOps

__all__ = [
    "WindowError",
    "TrueFormula",
    "Atom",
    "Not",
    "And",
    "Or",
    "Until",
    "Eventually",
    "Globally",
    "upper_bound_atom",
    "lower_bound_atom",
    "box_formula",
    "all_of",
    "temporal_depth",
    "satisfies",
    "robustness",
    "robustness_diff",
    "globalize",
    "verdict",
    "Trajectory",
    "RequirementSet",
    "combined_robustness",
    "combined_robustness_diff",
    "formula_to_dict",
    "formula_from_dict",
]


class WindowError(ValueError):
    """A formula was evaluated past the end of its trajectory."""


# ---------------------------------------------------------------------------
# Syntax


@dataclass(frozen=True)
class TrueFormula:
    """The formula that always holds (infinite robustness)."""


@dataclass(frozen=True, eq=False)
class Atom:
    """Strict inequality ``margin(state) > 0`` over one trajectory step.

    ``margin`` must be built from plain arithmetic on the state
    components so it evaluates on floats and autodiff nodes alike.
    ``descriptor`` carries the serializable form for config round-trips
    (None for ad-hoc callables, which then cannot be serialized).
    """

    margin: Callable
    label: str = "atom"
    descriptor: dict | None = field(default=None, repr=False)


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


def _check_window(lo: int, hi: int) -> None:
    if not (isinstance(lo, int) and isinstance(hi, int)):
        raise ValueError("window bounds must be integers (steps)")
    if lo < 0 or hi < lo:
        raise ValueError(f"invalid window [{lo}, {hi}]")


@dataclass(frozen=True)
class Until:
    lo: int
    hi: int
    left: "Formula"
    right: "Formula"

    def __post_init__(self):
        _check_window(self.lo, self.hi)


@dataclass(frozen=True)
class Eventually:
    lo: int
    hi: int
    child: "Formula"

    def __post_init__(self):
        _check_window(self.lo, self.hi)


@dataclass(frozen=True)
class Globally:
    lo: int
    hi: int
    child: "Formula"

    def __post_init__(self):
        _check_window(self.lo, self.hi)


Formula = (
    TrueFormula | Atom | Not | And | Or | Until | Eventually | Globally
)


def upper_bound_atom(signal: int, bound: float, scale: float = 1.0,
                     label: str | None = None) -> Atom:
    """Margin ``(bound - state[signal]) / scale``: holds below the bound."""
    if scale <= 0.0:
        raise ValueError("atom scale must be positive")
    if label is None:
        label = f"s{signal}<{bound:g}"
    desc = {"kind": "atom", "signal": signal, "direction": "upper",
            "bound": bound, "scale": scale, "label": label}
    return Atom(lambda s: (bound - s[signal]) / scale, label, desc)


def lower_bound_atom(signal: int, bound: float, scale: float = 1.0,
                     label: str | None = None) -> Atom:
    """Margin ``(state[signal] - bound) / scale``: holds above the bound."""
    if scale <= 0.0:
        raise ValueError("atom scale must be positive")
    if label is None:
        label = f"s{signal}>{bound:g}"
    desc = {"kind": "atom", "signal": signal, "direction": "lower",
            "bound": bound, "scale": scale, "label": label}
    return Atom(lambda s: (s[signal] - bound) / scale, label, desc)


def box_formula(signal: int, lo: float, hi: float,
                scale: float | None = None) -> Formula:
    """Conjunction keeping a signal inside [lo, hi], margins scaled.

    The default scale is the half-width of the box so a centred signal
    scores 1, which keeps differently-sized requirements commensurate
    when they are averaged together.
    """
    if not lo < hi:
        raise ValueError(f"box bounds out of order: [{lo}, {hi}]")
    if scale is None:
        scale = (hi - lo) / 2.0
    return And(upper_bound_atom(signal, hi, scale),
               lower_bound_atom(signal, lo, scale))


def all_of(formulas: Sequence[Formula]) -> Formula:
    """Left-folded conjunction of one or more formulas."""
    if not formulas:
        raise ValueError("empty conjunction")
    acc = formulas[0]
    for f in formulas[1:]:
        acc = And(acc, f)
    return acc


# ---------------------------------------------------------------------------
# Structure


def temporal_depth(phi: Formula) -> int:
    """Total reach, in steps, of the nested temporal windows of phi."""
    k = type(phi)
    if k is TrueFormula or k is Atom:
        return 0
    if k is Not:
        return temporal_depth(phi.child)
    if k is And or k is Or:
        return max(temporal_depth(phi.left), temporal_depth(phi.right))
    if k is Until:
        return phi.hi + max(temporal_depth(phi.left), temporal_depth(phi.right))
    if k is Eventually or k is Globally:
        return phi.hi + temporal_depth(phi.child)
    raise TypeError(f"not a formula: {phi!r}")


def _require_window(phi: Formula, length: int, t: int) -> None:
    if not isinstance(t, int) or t < 0:
        raise WindowError(f"evaluation step must be a non-negative integer, got {t!r}")
    need = t + temporal_depth(phi)
    if need >= length:
        raise WindowError(
            f"formula reaches step {need} but trajectory has {length} steps")


# ---------------------------------------------------------------------------
# Boolean satisfaction


def _sat(phi: Formula, states, t: int) -> bool:
    k = type(phi)
    if k is TrueFormula:
        return True
    if k is Atom:
        return phi.margin(states[t]) > 0.0
    if k is Not:
        return not _sat(phi.child, states, t)
    if k is And:
        return _sat(phi.left, states, t) and _sat(phi.right, states, t)
    if k is Or:
        return _sat(phi.left, states, t) or _sat(phi.right, states, t)
    if k is Until:
        for t2 in range(t + phi.lo, t + phi.hi + 1):
            if _sat(phi.right, states, t2) and all(
                    _sat(phi.left, states, t1) for t1 in range(t, t2 + 1)):
                return True
        return False
    if k is Eventually:
        return any(_sat(phi.child, states, t2)
                   for t2 in range(t + phi.lo, t + phi.hi + 1))
    if k is Globally:
        return all(_sat(phi.child, states, t2)
                   for t2 in range(t + phi.lo, t + phi.hi + 1))
    raise TypeError(f"not a formula: {phi!r}")


def satisfies(phi: Formula, trajectory: "Trajectory | Sequence", t: int = 0) -> bool:
    states = _states_of(trajectory)
    _require_window(phi, len(states), t)
    return _sat(phi, states, t)


# ---------------------------------------------------------------------------
# Quantitative robustness

# The evaluator computes, for each subformula, its score at every step of
# a contiguous index range in one bottom-up pass.  min/max folds run in
# ascending step order; since each fold just selects one of its inputs the
# result equals the naive per-step recursion bit for bit.


def _series(phi: Formula, states, lo: int, hi: int, ops):
    k = type(phi)
    if k is TrueFormula:
        if ops is not FLOAT_OPS:
            raise ValueError("the always-true formula has no finite robustness "
                             "and cannot be differentiated")
        return [math.inf] * (hi - lo + 1)
    if k is Atom:
        margin = phi.margin
        return [margin(states[t]) for t in range(lo, hi + 1)]
    if k is Not:
        return [-v for v in _series(phi.child, states, lo, hi, ops)]
    if k is And:
        mn = ops.minimum
        ls = _series(phi.left, states, lo, hi, ops)
        rs = _series(phi.right, states, lo, hi, ops)
        return [mn(a, b) for a, b in zip(ls, rs)]
    if k is Or:
        mx = ops.maximum
        ls = _series(phi.left, states, lo, hi, ops)
        rs = _series(phi.right, states, lo, hi, ops)
        return [mx(a, b) for a, b in zip(ls, rs)]
    if k is Eventually:
        cs = _series(phi.child, states, lo, hi + phi.hi, ops)
        mx = ops.maximum
        out = []
        for t in range(lo, hi + 1):
            base = t - lo
            best = cs[base + phi.lo]
            for tau in range(base + phi.lo + 1, base + phi.hi + 1):
                best = mx(best, cs[tau])
            out.append(best)
        return out
    if k is Globally:
        cs = _series(phi.child, states, lo, hi + phi.hi, ops)
        mn = ops.minimum
        out = []
        for t in range(lo, hi + 1):
            base = t - lo
            worst = cs[base + phi.lo]
            for tau in range(base + phi.lo + 1, base + phi.hi + 1):
                worst = mn(worst, cs[tau])
            out.append(worst)
        return out
    if k is Until:
        ls = _series(phi.left, states, lo, hi + phi.hi, ops)
        rs = _series(phi.right, states, lo, hi + phi.hi, ops)
        mn, mx = ops.minimum, ops.maximum
        out = []
        for t in range(lo, hi + 1):
            base = t - lo
            prefix = ls[base]        # running min of left over [t, tau]
            best = None
            for tau in range(base, base + phi.hi + 1):
                if tau > base:
                    prefix = mn(prefix, ls[tau])
                if tau - base >= phi.lo:
                    cand = mn(rs[tau], prefix)
                    best = cand if best is None else mx(best, cand)
            out.append(best)
        return out
    raise TypeError(f"not a formula: {phi!r}")


def robustness(phi: Formula, trajectory: "Trajectory | Sequence", t: int = 0) -> float:
    """Quantitative satisfaction score of phi at step t."""
    states = _states_of(trajectory)
    _require_window(phi, len(states), t)
    return _series(phi, states, t, t, FLOAT_OPS)[0]


def robustness_diff(phi: Formula, states: Sequence, t: int, tape: Tape):
    """Robustness over autodiff-node states, recorded on ``tape``."""
    _require_window(phi, len(states), t)
    return _series(phi, states, t, t, TapeOps(tape))[0]


def globalize(phi: Formula, length: int) -> Globally:
    """Wrap phi so it must hold at every step it fits in a trajectory.

    For a box requirement (``globally`` over atoms) this equals taking
    the worst atom margin over the whole trajectory.
    """
    last = length - 1 - temporal_depth(phi)
    if last < 0:
        raise WindowError(
            f"trajectory of {length} steps cannot fit formula of depth "
            f"{temporal_depth(phi)}")
    return Globally(0, last, phi)


def verdict(score: float) -> tuple[bool, bool]:
    """(satisfied, boundary): zero scores are unsatisfied and flagged."""
    return score > 0.0, score == 0.0


# ---------------------------------------------------------------------------
# Trajectories


class Trajectory:
    """Fixed-step sequence of monitored state vectors."""

    __slots__ = ("states", "dt")

    def __init__(self, states: Sequence[Sequence], dt: float):
        states = tuple(tuple(s) for s in states)
        if not states:
            raise ValueError("trajectory must contain at least one state")
        dim = len(states[0])
        if any(len(s) != dim for s in states):
            raise ValueError("trajectory states have inconsistent dimensions")
        if not (dt > 0.0 and math.isfinite(dt)):
            raise ValueError(f"step size must be positive and finite, got {dt!r}")
        for i, s in enumerate(states):
            for v in s:
                if type(v) is float and not math.isfinite(v):
                    raise ValueError(f"non-finite value at step {i}")
        self.states = states
        self.dt = dt

    @property
    def dim(self) -> int:
        return len(self.states[0])

    def __len__(self) -> int:
        return len(self.states)


def _states_of(trajectory) -> Sequence:
    if isinstance(trajectory, Trajectory):
        return trajectory.states
    return trajectory


# ---------------------------------------------------------------------------
# Requirement sets


class RequirementSet:
    """Weighted safety requirements scored together over a fixed window.

    The combined score over a window of ``window`` consecutive states is
    the weight-normalized sum of the member robustness values.  An
    optional ``window_transform`` rebases the window's states before
    scoring (used for budgets that restart at the window head, e.g. an
    energy accumulator); it receives the state list and a scalar backend
    and must return a list of equal length.
    """

    def __init__(self, items: Sequence[tuple], window: int,
                 window_transform: Callable | None = None):
        if not items:
            raise ValueError("requirement set must contain at least one formula")
        if not (isinstance(window, int) and window >= 1):
            raise ValueError(f"window must be a positive integer, got {window!r}")
        norm = []
        labels = set()
        for entry in items:
            if len(entry) == 3:
                phi, weight, label = entry
            else:
                phi, weight = entry
                label = f"req{len(norm)}"
            weight = float(weight)
            if not (weight > 0.0 and math.isfinite(weight)):
                raise ValueError(f"requirement weight must be positive, got {weight!r}")
            if temporal_depth(phi) > window:
                raise ValueError(
                    f"requirement {label!r} has temporal depth "
                    f"{temporal_depth(phi)} exceeding window {window}")
            if label in labels:
                raise ValueError(f"duplicate requirement label {label!r}")
            labels.add(label)
            norm.append((phi, weight, label))
        self.items: tuple = tuple(norm)
        self.window = window
        self.window_transform = window_transform
        self.total_weight = 0.0
        for _, w, _ in self.items:
            self.total_weight += w

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for _, _, label in self.items)

    @property
    def formulas(self) -> tuple:
        return tuple(phi for phi, _, _ in self.items)

    def windows_in(self, length: int) -> int:
        """Number of full evaluation windows a trajectory admits."""
        return max(0, length - self.window + 1)


def _combined(reqs: RequirementSet, states, t: int, ops):
    length = len(states)
    if t < 0 or t + reqs.window > length:
        raise WindowError(
            f"window [{t}, {t + reqs.window - 1}] exceeds trajectory of "
            f"{length} steps")
    win = list(states[t:t + reqs.window])
    if reqs.window_transform is not None:
        win = reqs.window_transform(win, ops)
        if len(win) != reqs.window:
            raise ValueError("window transform changed the window length")
    total = None
    for phi, weight, _ in reqs.items:
        score = _series(phi, win, 0, 0, ops)[0]
        term = score * weight
        total = term if total is None else total + term
    return total / reqs.total_weight


def combined_robustness(reqs: RequirementSet,
                        trajectory: "Trajectory | Sequence", t: int = 0) -> float:
    """Weight-normalized combined score of all requirements at step t."""
    return _combined(reqs, _states_of(trajectory), t, FLOAT_OPS)


def combined_robustness_diff(reqs: RequirementSet, states: Sequence, t: int,
                             tape: Tape):
    """Differentiable combined score over autodiff-node states."""
    return _combined(reqs, states, t, TapeOps(tape))


# ---------------------------------------------------------------------------
# Serialization

_TEMPORAL_KINDS = {"until": Until, "eventually": Eventually, "globally": Globally}


def formula_to_dict(phi: Formula) -> dict:
    k = type(phi)
    if k is TrueFormula:
        return {"kind": "true"}
    if k is Atom:
        if phi.descriptor is None:
            raise ValueError(f"atom {phi.label!r} has no serializable descriptor")
        return dict(phi.descriptor)
    if k is Not:
        return {"kind": "not", "child": formula_to_dict(phi.child)}
    if k is And or k is Or:
        return {"kind": "and" if k is And else "or",
                "left": formula_to_dict(phi.left),
                "right": formula_to_dict(phi.right)}
    if k is Until:
        return {"kind": "until", "window": [phi.lo, phi.hi],
                "left": formula_to_dict(phi.left),
                "right": formula_to_dict(phi.right)}
    if k is Eventually or k is Globally:
        return {"kind": "eventually" if k is Eventually else "globally",
                "window": [phi.lo, phi.hi],
                "child": formula_to_dict(phi.child)}
    raise TypeError(f"not a formula: {phi!r}")


def formula_from_dict(spec: dict) -> Formula:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValueError(f"formula spec must be an object with a 'kind': {spec!r}")
    kind = spec["kind"]
    if kind == "true":
        return TrueFormula()
    if kind == "atom":
        direction = spec.get("direction")
        signal = spec.get("signal")
        bound = spec.get("bound")
        if not isinstance(signal, int) or signal < 0:
            raise ValueError(f"atom signal must be a non-negative index: {spec!r}")
        if not isinstance(bound, (int, float)):
            raise ValueError(f"atom bound must be a number: {spec!r}")
        scale = float(spec.get("scale", 1.0))
        label = spec.get("label")
        if direction == "upper":
            return upper_bound_atom(signal, float(bound), scale, label)
        if direction == "lower":
            return lower_bound_atom(signal, float(bound), scale, label)
        raise ValueError(f"atom direction must be 'upper' or 'lower': {spec!r}")
    if kind == "not":
        return Not(formula_from_dict(spec["child"]))
    if kind in ("and", "or"):
        cls = And if kind == "and" else Or
        if "children" in spec:
            kids = [formula_from_dict(c) for c in spec["children"]]
            if len(kids) < 2:
                raise ValueError("'children' needs at least two formulas")
            acc = kids[0]
            for c in kids[1:]:
                acc = cls(acc, c)
            return acc
        return cls(formula_from_dict(spec["left"]),
                   formula_from_dict(spec["right"]))
    if kind in _TEMPORAL_KINDS:
        window = spec.get("window")
        if (not isinstance(window, (list, tuple)) or len(window) != 2
                or not all(isinstance(v, int) for v in window)):
            raise ValueError(f"temporal window must be two integer steps: {spec!r}")
        lo, hi = window
        cls = _TEMPORAL_KINDS[kind]
        if kind == "until":
            return Until(lo, hi, formula_from_dict(spec["left"]),
                         formula_from_dict(spec["right"]))
        return cls(lo, hi, formula_from_dict(spec["child"]))
    raise ValueError(f"unknown formula kind {kind!r}")
