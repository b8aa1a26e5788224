"""Per-iteration run records shared by the first-order and derivative-free solvers."""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Any

import numpy as np

__all__ = ["RunHistory", "write_atomic"]

#: keys every JSON-lines record carries
CORE_KEYS = ("k", "f", "alpha", "dirderivs", "evals")


def _plain(value):
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else repr(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def write_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = os.fspath(path)
    folder = os.path.dirname(path) or "."
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class RunHistory:
    """Trace of one optimizer run.

    ``records`` holds one dict per iteration with at least the keys
    ``k, f, alpha, dirderivs, evals`` (counters are cumulative). Iterates,
    sketches and projected gradients are kept only when requested since they
    cost ``O(d)`` memory per iteration.

    ``value_log`` lists every objective value in evaluation order; data
    profiles are built from its running minimum.
    """

    solver: str
    problem: str
    dim: int
    f0: float
    x0: np.ndarray
    records: list[dict] = field(default_factory=list)
    iterates: list[np.ndarray] = field(default_factory=list)
    sketches: list[np.ndarray] = field(default_factory=list)
    projected_gradients: list[np.ndarray] = field(default_factory=list)
    value_log: list[float] = field(default_factory=list)
    final_x: np.ndarray | None = None
    final_f: float | None = None
    status: str = "running"
    message: str = ""
    meta: dict[str, Any] = field(default_factory=dict)

    def append(self, **record) -> dict:
        self.records.append(record)
        return record

    def __len__(self) -> int:
        return len(self.records)

    @property
    def values(self) -> np.ndarray:
        """Incumbent value after each iteration."""
        return np.array([r["f"] for r in self.records], dtype=float)

    def best_by_evaluation(self) -> np.ndarray:
        """Running minimum of the evaluation log."""
        if not self.value_log:
            return np.array([self.f0])
        return np.minimum.accumulate(np.asarray(self.value_log, dtype=float))

    def finish(self, x, f, status: str = "completed", message: str = "") -> "RunHistory":
        self.final_x = np.array(x, dtype=float)
        self.final_f = float(f)
        self.status = status
        self.message = message
        return self

    # -- serialisation ----------------------------------------------------
    def to_jsonl(self) -> str:
        lines = [json.dumps({key: _plain(val) for key, val in rec.items()}) for rec in self.records]
        return "\n".join(lines) + ("\n" if lines else "")

    def write_jsonl(self, path) -> None:
        write_atomic(path, self.to_jsonl())

    def summary(self) -> dict:
        return {
            "solver": self.solver,
            "problem": self.problem,
            "dim": self.dim,
            "f0": self.f0,
            "final_f": self.final_f,
            "iterations": len(self.records),
            "evals": self.records[-1]["evals"] if self.records else 0,
            "dirderivs": self.records[-1]["dirderivs"] if self.records else 0,
            "status": self.status,
            "message": self.message,
            **{k: _plain(v) for k, v in self.meta.items()},
        }

    @staticmethod
    def read_jsonl(path) -> list[dict]:
        with open(path) as fh:
            return [json.loads(line) for line in fh if line.strip()]
