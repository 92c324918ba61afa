"""Per-iteration run logs and their CSV / JSON serializations."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CSV_COLUMNS = ("iter", "comm_rounds", "objective", "feas_residual", "dist_to_ref")


@dataclass
class RunReport:
    records: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    comm_rounds: int = 0
    reason: str = ""
    params: dict = field(default_factory=dict)
    counters: dict = field(default_factory=dict)
    final: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def log(self, it, comm_rounds, objective, feas_residual, dist_to_ref=None):
        self.records.append({
            "iter": int(it),
            "comm_rounds": int(comm_rounds),
            "objective": float(objective),
            "feas_residual": float(feas_residual),
            "dist_to_ref": None if dist_to_ref is None else float(dist_to_ref),
        })

    def column(self, name):
        return np.array([np.nan if r[name] is None else r[name] for r in self.records])

    def first_iter_below(self, column, threshold):
        """First logged iteration where `column` is at or below `threshold`, or None."""
        for r in self.records:
            v = r[column]
            if v is not None and v <= threshold:
                return r["iter"]
        return None

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in self.records:
                w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])

    def summary(self):
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "comm_rounds": self.comm_rounds,
            "reason": self.reason,
            "params": {k: float(v) for k, v in self.params.items()},
            "counters": {k: int(v) for k, v in self.counters.items()},
            "final": {k: _jsonable(v) for k, v in self.final.items() if _serializable(v)},
            "meta": {k: _jsonable(v) for k, v in self.meta.items()},
        }

    def write_json(self, path):
        Path(path).write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [float(t) for t in v.ravel()]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, (list, tuple)):
        return [_jsonable(t) for t in v]
    if isinstance(v, dict):
        return {k: _jsonable(t) for k, t in v.items()}
    return v


def _serializable(v):
    return isinstance(v, (np.ndarray, np.generic, list, tuple, dict, str, int, float, bool, type(None)))


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        out.append({
            "iter": int(r["iter"]),
            "comm_rounds": int(r["comm_rounds"]),
            "objective": float(r["objective"]),
            "feas_residual": float(r["feas_residual"]),
            "dist_to_ref": float(r["dist_to_ref"]) if r["dist_to_ref"] else None,
        })
    return out
