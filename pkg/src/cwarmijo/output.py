"""Trajectory, outcome and summary writers (CSV and JSON lines).

Floats go out with 17 significant digits (``%.17g``) in CSV so every value
survives a round trip; JSON uses Python's shortest round-trip repr. Missing
values are empty CSV cells and ``null`` in JSON.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from collections.abc import Iterable
from pathlib import Path

import numpy as np

from .analysis import ExperimentReport, RunOutcome
from .optimizers import Trajectory


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else "%.17g" % v
    return str(v)


def _jsonable(v):
    if isinstance(v, (float, np.floating)):
        return None if math.isnan(v) else float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def trajectory_header(dim: int) -> list[str]:
    return ["n", *(f"z{i}" for i in range(dim)), "f", "grad_norm", "delta1", "delta2", "step_norm"]


def trajectory_rows(traj: Trajectory) -> Iterable[list]:
    for k in range(len(traj)):
        yield [
            int(traj.indices[k]),
            *traj.points[k],
            traj.values[k],
            traj.gradient_norms[k],
            traj.deltas[k, 0],
            traj.deltas[k, 1],
            traj.step_norms[k],
        ]


def write_trajectory(traj: Trajectory, path: Path, fmt_name: str = "csv") -> Path:
    path = Path(path)
    header = trajectory_header(traj.points.shape[1])
    with open(path, "w", newline="") as fh:
        if fmt_name == "csv":
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in trajectory_rows(traj):
                w.writerow([fmt(v) for v in row])
        else:
            for row in trajectory_rows(traj):
                n, rest = row[0], row[1:]
                d = traj.points.shape[1]
                rec = {
                    "n": n,
                    "z": _jsonable(rest[:d]),
                    **dict(zip(header[d + 1 :], _jsonable(rest[d:]))),
                }
                fh.write(json.dumps(rec) + "\n")
    return path


OUTCOME_FIELDS = [f.name for f in dataclasses.fields(RunOutcome)]


def _outcome_row(o: RunOutcome) -> dict:
    row = {}
    for name in OUTCOME_FIELDS:
        v = getattr(o, name)
        if isinstance(v, tuple):
            for i, x in enumerate(v):
                row[f"{name}_{i}"] = x
        else:
            row[name] = v
    return row


def write_outcomes(outcomes: list[RunOutcome], path: Path, fmt_name: str = "csv") -> Path:
    path = Path(path)
    rows = [_outcome_row(o) for o in outcomes]
    with open(path, "w", newline="") as fh:
        if fmt_name == "csv":
            header = list(rows[0]) if rows else OUTCOME_FIELDS
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(row.get(h)) for h in header])
        else:
            for o in outcomes:
                fh.write(json.dumps(_jsonable(dataclasses.asdict(o))) + "\n")
    return path


def trajectory_summary(traj: Trajectory, **extra) -> dict:
    v = traj.verdict
    return {
        "type": "run",
        **extra,
        "method": traj.method.value,
        "verdict": v.kind.value,
        "reason": v.reason or None,
        "iterations": traj.iterations,
        "final_point": _jsonable(traj.final_point),
        "final_gradient_norm": _jsonable(v.final_gradient_norm),
        "final_value": _jsonable(traj.values[-1]),
    }


def write_summary(lines: Iterable[dict], path: Path) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        for line in lines:
            fh.write(json.dumps(_jsonable(line)) + "\n")
    return path


def report_summary(report: ExperimentReport) -> dict:
    return {"type": "aggregate", **report.summary()}


def emit_outputs(obj, path: Path, fmt_name: str = "csv") -> Path:
    """Write a trajectory, an experiment report's per-run outcomes, or a
    plain summary dict to ``path``."""
    if isinstance(obj, Trajectory):
        return write_trajectory(obj, path, fmt_name)
    if isinstance(obj, ExperimentReport):
        return write_outcomes(obj.outcomes, path, fmt_name)
    if isinstance(obj, dict):
        return write_summary([obj], path)
    raise TypeError(f"cannot emit {type(obj).__name__}")
