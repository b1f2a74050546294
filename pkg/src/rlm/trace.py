"""Per-iteration records, run summaries and their CSV/JSON forms."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable

TRACE_COLUMNS = ("iter", "f", "grad_norm", "lambda", "mu", "rho", "step_norm", "successful", "sub_iters", "wall_ms")


class Status(str, Enum):
    GRAD_TOL = "GradTol"
    F_TOL = "FTol"
    MAX_ITER = "MaxIter"
    TIME_BUDGET = "TimeBudget"
    STEP_FAILURE = "StepFailure"

    def __str__(self):
        return self.value

    @property
    def converged(self) -> bool:
        return self in (Status.GRAD_TOL, Status.F_TOL)


@dataclass
class IterRecord:
    """One iteration. ``f`` and ``grad_norm`` are taken at the iterate the step
    starts from; ``wall_ms`` is cumulative solver time at the end of the iteration."""

    k: int
    f: float
    grad_norm: float
    lam: float
    mu: float
    rho: float
    step_norm: float
    successful: bool
    sub_iters: int
    wall_ms: float

    def row(self) -> list[str]:
        return [
            str(self.k),
            fmt(self.f),
            fmt(self.grad_norm),
            fmt(self.lam),
            fmt(self.mu),
            fmt(self.rho),
            fmt(self.step_norm),
            "true" if self.successful else "false",
            str(self.sub_iters),
            fmt(self.wall_ms),
        ]


@dataclass
class RunSummary:
    status: Status
    iters: int
    succ_iters: int
    final_f: float
    final_grad: float
    wall_ms: float
    solver: str = "rlm"
    trace: list[IterRecord] = field(default_factory=list, repr=False)
    x: Any = field(default=None, repr=False)
    violations: list[str] = field(default_factory=list, repr=False)
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "solver": self.solver,
            "status": str(self.status),
            "iters": self.iters,
            "succ_iters": self.succ_iters,
            "final_f": self.final_f,
            "final_grad": self.final_grad,
            "wall_ms": self.wall_ms,
            "violations": len(self.violations),
            "message": self.message,
        }

    def iterate_values(self, column: str = "grad_norm") -> list[float]:
        """Values of ``column`` at the distinct iterates x_0, x_1, ... (repeats
        caused by unsuccessful iterations dropped), followed by the final value."""
        return iterate_values([asdict(r) for r in self.trace], column, final=self._final(column))

    def _final(self, column):
        return {"f": self.final_f, "grad_norm": self.final_grad}.get(column)


def fmt(v: float) -> str:
    """Shortest round-trip decimal for a float."""
    return repr(float(v))


_RECORD_KEY = {"iter": "k", "lambda": "lam"}


def iterate_values(rows: list[dict], column: str, final: float | None = None) -> list[float]:
    key = _RECORD_KEY.get(column, column)
    out = []
    prev_success = True
    for r in rows:
        if prev_success:
            out.append(float(r[key]))
        s = r.get("successful", True)
        prev_success = s if isinstance(s, bool) else str(s).lower() == "true"
    if final is not None and prev_success:
        out.append(float(final))
    return out


def write_trace_csv(trace: Iterable[IterRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in trace:
            w.writerow(r.row())


def read_trace_csv(path: str | Path) -> list[dict]:
    """Rows as dicts keyed like :class:`IterRecord` fields (``k``, ``lam``, ...)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        d = {}
        for col, val in r.items():
            key = _RECORD_KEY.get(col, col)
            if col == "successful":
                d[key] = val.strip().lower() == "true"
            elif col in ("iter", "sub_iters"):
                d[key] = int(val)
            else:
                d[key] = float(val)
        out.append(d)
    return out


def write_summary_json(summary: RunSummary, path: str | Path, extra: dict | None = None) -> None:
    d = summary.to_dict()
    if extra:
        d.update(extra)
    Path(path).write_text(json.dumps(_jsonable(d), indent=2, sort_keys=True) + "\n")


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj

