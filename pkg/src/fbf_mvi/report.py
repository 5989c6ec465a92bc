"""Run reports and the CSV/JSON artifacts written by the CLI."""

import csv
import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

STOP_REASONS = ("tolerance", "horizon", "divergence")


@dataclass
class MonitorVerdict:
    passed: bool
    margin: float
    detail: str = ""


@dataclass
class IterHistory:
    xs: np.ndarray
    ys: np.ndarray
    residuals: np.ndarray
    losses: Optional[np.ndarray] = None


@dataclass
class RunReport:
    problem_id: str
    method: str
    lam: float
    dt: Optional[float]
    t_end: Optional[float]
    tol: float
    final_residual: float
    iterations_or_steps: int
    stop_reason: str
    monitor_verdicts: dict = field(default_factory=dict)
    certificate: Optional[object] = None
    wall_time_ms: float = 0.0
    final_x: Optional[list] = None
    history: Optional[IterHistory] = field(default=None, repr=False)

    def to_dict(self):
        out = {
            "problem_id": self.problem_id,
            "method": self.method,
            "lambda": self.lam,
            "dt": self.dt,
            "t_end": self.t_end,
            "tol": self.tol,
            "final_residual": self.final_residual,
            "iterations_or_steps": self.iterations_or_steps,
            "stop_reason": self.stop_reason,
            "monitor_verdicts": {k: asdict(v) for k, v in self.monitor_verdicts.items()},
            "certificate": None if self.certificate is None else asdict(self.certificate),
            "wall_time_ms": self.wall_time_ms,
            "final_x": self.final_x,
        }
        return _jsonable(out)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        # JSON has no inf/nan literals
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, payload):
    with open(path, "w", encoding="ascii") as fh:
        json.dump(_jsonable(payload), fh, indent=2)
        fh.write("\n")


def _fmt(v):
    return "%.17g" % v


def trajectory_header(n, lyapunov=False, loss=False):
    cols = ["t"] + [f"x_{i}" for i in range(1, n + 1)] + [f"y_{i}" for i in range(1, n + 1)]
    cols.append("residual")
    if lyapunov:
        cols.append("lyapunov")
    if loss:
        cols.append("loss")
    return cols


def write_trajectory_csv(path, times, xs, ys, residuals, lyapunov=None, loss=None):
    """Write ``t,x_1..x_n,y_1..y_n,residual[,lyapunov][,loss]``."""
    xs = np.asarray(xs)
    n = xs.shape[1]
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(trajectory_header(n, lyapunov is not None, loss is not None))
        for k in range(len(times)):
            row = [times[k], *xs[k], *ys[k], residuals[k]]
            if lyapunov is not None:
                row.append(lyapunov[k])
            if loss is not None:
                row.append(loss[k])
            w.writerow([_fmt(v) for v in row])


def read_trajectory_csv(path):
    with open(path, newline="", encoding="ascii") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(len(rows) - 1, len(header))
    return header, data
