"""Discrete solvers: relaxed Tseng forward-backward-forward and prox-gradient."""

import time
from dataclasses import dataclass

import numpy as np

from .core import LogisticGradient
from .errors import DivergenceError, InvalidArgumentError
from .prox import ScaledL1
from .report import IterHistory, RunReport

METHODS = ("tseng", "proxgrad")

LOSS_GUARD = -30.0


@dataclass
class IterSpec:
    lam: float
    x0: np.ndarray
    method: str = "tseng"
    relaxation: float = 1.0
    max_iters: int = 1000
    tol: float = 1e-8

    def __post_init__(self):
        self.x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if self.method not in METHODS:
            raise InvalidArgumentError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.lam > 0:
            raise InvalidArgumentError(f"lambda must be positive, got {self.lam}")
        if not 0 < self.relaxation <= 1:
            raise InvalidArgumentError(f"relaxation must lie in (0, 1], got {self.relaxation}")
        if not (isinstance(self.max_iters, (int, np.integer)) and self.max_iters >= 1):
            raise InvalidArgumentError("max_iters must be a positive integer")
        if self.tol < 0:
            raise InvalidArgumentError("tol must be nonnegative")


def is_logistic_l1(problem):
    return isinstance(problem.operator, LogisticGradient) and isinstance(problem.prox, ScaledL1)


def loss_l1_logistic(problem, x):
    """``sum_i log(1 + exp(-a_i <b_i, x>)) + eta ||x||_1``."""
    if not is_logistic_l1(problem):
        raise InvalidArgumentError("loss is defined only for logistic-gradient problems with an L1 prox")
    x = np.asarray(x, dtype=float)
    m = problem.operator.margins(x)
    big = m < LOSS_GUARD
    terms = np.empty_like(m)
    terms[big] = -m[big]
    terms[~big] = np.log1p(np.exp(-m[~big]))
    return float(terms.sum() + problem.prox.eta * np.abs(x).sum())


def iterate(problem, spec):
    """Run the Tseng or prox-gradient iteration.

    Tseng::

        y_n     = prox_{lam h}(x_n - lam T x_n)
        x_{n+1} = (1 - r) x_n + r (y_n + lam (T x_n - T y_n))

    stops once ``||x_n - y_n|| <= tol``. Prox-gradient sets
    ``x_{n+1} = y_n`` and stops once ``||x_{n+1} - x_n|| <= tol``, which is
    the same quantity. The returned report carries the full history.
    """
    if spec.x0.shape != (problem.dim,):
        raise InvalidArgumentError(f"x0 has shape {spec.x0.shape}, expected ({problem.dim},)")
    lam, rel, tol = spec.lam, spec.relaxation, spec.tol
    tseng = spec.method == "tseng"
    start = time.perf_counter()
    x = spec.x0.copy()
    xs, ys, res = [], [], []
    reason = "horizon"
    n = 0
    while True:
        y, Tx = problem.prox_step(x, lam)
        r = float(np.sqrt(np.dot(x - y, x - y)))
        xs.append(x)
        ys.append(y)
        res.append(r)
        if not np.isfinite(r):
            raise DivergenceError(n)
        if r <= tol:
            reason = "tolerance"
            break
        if n == spec.max_iters:
            break
        if tseng:
            x = (1.0 - rel) * x + rel * (y + lam * (Tx - problem.operator(y)))
        else:
            x = y
        n += 1
        if not np.all(np.isfinite(x)):
            raise DivergenceError(n)
    elapsed = (time.perf_counter() - start) * 1e3
    xs = np.array(xs)
    losses = None
    if is_logistic_l1(problem):
        losses = np.array([loss_l1_logistic(problem, v) for v in xs])
    history = IterHistory(xs=xs, ys=np.array(ys), residuals=np.array(res), losses=losses)
    return RunReport(
        problem_id=problem.name,
        method="tseng-fbf" if tseng else "prox-grad",
        lam=lam,
        dt=rel if tseng else None,
        t_end=None,
        tol=tol,
        final_residual=res[-1],
        iterations_or_steps=n,
        stop_reason=reason,
        wall_time_ms=elapsed,
        final_x=xs[-1].tolist(),
        history=history,
    )
