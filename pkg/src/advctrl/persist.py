"""Deterministic on-disk formats: weight files, CSV logs, summaries.

Floats are serialized through ``repr`` (the shortest form that parses
back to the same double), so weight files round-trip bit-exactly and
two runs with the same configuration and seed produce byte-identical
outputs.  The only wall-clock item, the ``created`` stamp in weight
files, honours the ``SOURCE_DATE_EPOCH`` convention so reproducible
builds can pin it.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .policy import MlpSpec
from .stl import RequirementSet, robustness
from .autodiff import FLOAT_OPS

__all__ = [
    "WeightFormatError",
    "WEIGHT_FORMAT_VERSION",
    "LoadedWeights",
    "created_timestamp",
    "save_weights",
    "load_weights",
    "write_history_csv",
    "write_rollout_csv",
    "write_testset_csv",
    "write_compare_csv",
    "write_summary_json",
]

WEIGHT_FORMAT_VERSION = 1


class WeightFormatError(ValueError):
    """Weight file is malformed or does not match the expected run."""


def created_timestamp() -> str:
    """UTC creation stamp; fixed by ``SOURCE_DATE_EPOCH`` when set."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    seconds = int(epoch) if epoch else int(time.time())
    stamp = datetime.fromtimestamp(seconds, timezone.utc)
    return stamp.strftime("%Y-%m-%dT%H:%M:%SZ")


def save_weights(path: str, spec: MlpSpec, theta, role: str,
                 config_hash: str = "", seed: int | None = None) -> None:
    params = [float(v) for v in np.asarray(theta, dtype=float).ravel()]
    if len(params) != spec.param_count:
        raise WeightFormatError(
            f"parameter vector has {len(params)} entries, spec needs "
            f"{spec.param_count}")
    if not all(math.isfinite(v) for v in params):
        raise WeightFormatError("refusing to save non-finite parameters")
    doc = {
        "format_version": WEIGHT_FORMAT_VERSION,
        "kind": "policy_weights",
        "role": role,
        "created": created_timestamp(),
        "config_hash": config_hash,
        "seed": seed,
        "spec": {
            "sizes": list(spec.sizes),
            "out_lo": list(spec.out_lo),
            "out_hi": list(spec.out_hi),
            "noise_dim": spec.noise_dim,
            "leaky_slope": spec.leaky_slope,
            "input_scale": (None if spec.input_scale is None
                            else list(spec.input_scale)),
        },
        "params": params,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ": "), indent=1)
        fh.write("\n")


@dataclass(frozen=True)
class LoadedWeights:
    spec: MlpSpec
    theta: np.ndarray
    role: str
    config_hash: str
    seed: int | None
    created: str


def load_weights(path: str, expect_config_hash: str | None = None) -> LoadedWeights:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise WeightFormatError(f"cannot read weights {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise WeightFormatError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("kind") != "policy_weights":
        raise WeightFormatError(f"{path} is not a policy weight file")
    if doc.get("format_version") != WEIGHT_FORMAT_VERSION:
        raise WeightFormatError(
            f"{path}: unsupported format version {doc.get('format_version')!r}")
    try:
        raw = doc["spec"]
        scale = raw.get("input_scale")
        spec = MlpSpec(
            sizes=tuple(int(v) for v in raw["sizes"]),
            out_lo=tuple(float(v) for v in raw["out_lo"]),
            out_hi=tuple(float(v) for v in raw["out_hi"]),
            noise_dim=int(raw["noise_dim"]),
            leaky_slope=float(raw["leaky_slope"]),
            input_scale=None if scale is None else tuple(
                float(v) for v in scale),
        )
        params = doc["params"]
    except (KeyError, TypeError, ValueError) as exc:
        raise WeightFormatError(f"{path}: malformed weight file: {exc}") from exc
    if len(params) != spec.param_count:
        raise WeightFormatError(
            f"{path}: {len(params)} parameters for a network that needs "
            f"{spec.param_count}")
    theta = np.asarray(params, dtype=float)
    if not np.all(np.isfinite(theta)):
        raise WeightFormatError(f"{path}: non-finite parameters")
    stored = doc.get("config_hash", "")
    if expect_config_hash is not None and stored != expect_config_hash:
        raise WeightFormatError(
            f"{path}: weights were trained under configuration {stored[:12]}, "
            f"current configuration is {expect_config_hash[:12]}")
    return LoadedWeights(spec, theta, doc.get("role", ""), stored,
                         doc.get("seed"), doc.get("created", ""))


# ---------------------------------------------------------------------------
# CSV and JSON reports


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_history_csv(path: str, history) -> None:
    """Training curve: one row per gradient update."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(("iteration", "phase", "objective", "grad_norm"))
        for iteration, phase, value, norm in history:
            w.writerow((iteration, phase, _fmt(float(value)), _fmt(float(norm))))


def write_rollout_csv(path: str, model, record,
                      reqs: RequirementSet | None = None) -> None:
    """One row per state along a rollout.

    Action columns are blank on the final row (no action is taken from
    the last state).  When a requirement set is given, each row carries
    the robustness of the evaluation window starting at that step, blank
    once the window no longer fits.
    """
    states = record.trajectory.states
    full = record.states
    n_ctl = len(model.action_space_ctl)
    n_env = len(model.action_space_env)
    header = ["step", "time"] + list(model.state_labels)
    header += [f"u_ctl_{i}" for i in range(n_ctl)]
    header += [f"u_env_{i}" for i in range(n_env)]
    if reqs is not None:
        header += [f"rob_{label}" for label in reqs.labels]
        header.append("rob_combined")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(header)
        for i, state in enumerate(full):
            row = [i, _fmt(i * model.dt)]
            row += [_fmt(float(v)) for v in state]
            if i < len(record.actions_ctl):
                row += [_fmt(float(v)) for v in record.actions_ctl[i]]
                row += [_fmt(float(v)) for v in record.actions_env[i]]
            else:
                row += [""] * (n_ctl + n_env)
            if reqs is not None:
                if i + reqs.window <= len(states):
                    seg = list(states[i:i + reqs.window])
                    if reqs.window_transform is not None:
                        seg = reqs.window_transform(seg, FLOAT_OPS)
                    total = 0.0
                    for phi, weight, _ in reqs.items:
                        score = robustness(phi, seg, 0)
                        row.append(_fmt(score))
                        total += weight * score
                    row.append(_fmt(total / reqs.total_weight))
                else:
                    row += [""] * (len(reqs.labels) + 1)
            w.writerow(row)


def write_testset_csv(path: str, labels, rows) -> None:
    """Per-sample scores of one evaluation run."""
    header = ["sample"]
    for label in labels:
        header += [f"rob_{label}", f"sat_{label}", f"boundary_{label}"]
    header += ["events", "error"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(header)
        for i, row in enumerate(rows):
            out = [i]
            for label in labels:
                out += [_fmt(row.scores[label]), int(row.satisfied[label]),
                        int(row.boundary[label])]
            out += [row.events, row.error or ""]
            w.writerow(out)


def write_compare_csv(path: str, labels, hashes, rows_a, rows_b,
                      name_a: str = "candidate",
                      name_b: str = "baseline") -> None:
    """Paired per-sample scores of two controllers on identical inputs."""
    header = ["sample", "pair"]
    for label in labels:
        header += [f"{name_a}_{label}", f"{name_b}_{label}", f"diff_{label}"]
    header += [f"{name_a}_error", f"{name_b}_error"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(header)
        for i, (pair, ra, rb) in enumerate(zip(hashes, rows_a, rows_b)):
            row = [i, pair]
            for label in labels:
                a = ra.scores[label]
                b = rb.scores[label]
                row += [_fmt(a), _fmt(b), _fmt(a - b)]
            row += [ra.error or "", rb.error or ""]
            w.writerow(row)


def write_summary_json(path: str, payload: dict) -> None:
    """Deterministic JSON report (sorted keys, no timestamps)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
