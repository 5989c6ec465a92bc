"""Continuous-time flows and fixed-step integrators.

The forward-backward-forward flow is

    y(t)  = prox_{lam h}(x(t) - lam T x(t))
    x'(t) = y(t) - x(t) + lam (T x(t) - T y(t))

and the baseline proximal-gradient flow is ``x' = -delta (x - y)``.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DivergenceError, InvalidArgumentError, InvalidLambdaError

SCHEMES = ("euler", "rk4")
SYSTEMS = ("fbf", "proxgrad")


@dataclass
class FlowSpec:
    lam: float
    x0: np.ndarray
    t_end: float = 20.0
    dt: float = 0.01
    system: str = "fbf"
    delta: float = 1.0
    record_stride: int = 1
    allow_invalid_lambda: bool = False

    def __post_init__(self):
        self.x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if self.system not in SYSTEMS:
            raise InvalidArgumentError(f"system must be one of {SYSTEMS}, got {self.system!r}")
        if not self.lam > 0:
            raise InvalidArgumentError(f"lambda must be positive, got {self.lam}")
        if not self.delta > 0:
            raise InvalidArgumentError(f"delta must be positive, got {self.delta}")
        if not (self.dt > 0 and self.dt <= self.t_end):
            raise InvalidArgumentError(f"need 0 < dt <= t_end, got dt={self.dt}, t_end={self.t_end}")
        if not (isinstance(self.record_stride, (int, np.integer)) and self.record_stride >= 1):
            raise InvalidArgumentError("record_stride must be a positive integer")


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    xs: np.ndarray
    ys: np.ndarray
    residuals: np.ndarray
    lyapunov: Optional[np.ndarray] = None
    dt: float = float("nan")
    steps: int = 0
    stop_reason: str = "horizon"
    lam: float = float("nan")

    def __len__(self):
        return len(self.times)

    @property
    def final_residual(self):
        return float(self.residuals[-1])


def lipschitz_for_validation(problem):
    """``beta`` used to validate step sizes.

    The stored constant when present, otherwise a sampled estimate inflated
    by 5%.
    """
    if problem.lipschitz_beta is not None:
        return problem.lipschitz_beta
    from .analysis import default_box, estimate_lipschitz

    lo, hi = default_box(problem)
    return 1.05 * estimate_lipschitz(problem.operator, (lo, hi), samples=20_000, seed=0)


def check_lambda(problem, lam):
    beta = lipschitz_for_validation(problem)
    if not lam * (1.0 + beta**2) < 1.0:
        raise InvalidLambdaError(
            f"lambda={lam} violates lambda*(1+beta^2) < 1 with beta={beta:.6g} "
            f"(bound {1.0 / (1.0 + beta**2):.6g})"
        )


def fbf_map(problem, x, lam):
    """Return ``(y + lam (T x - T y), y)``, the point the flow pulls towards."""
    y, Tx = problem.prox_step(x, lam)
    return y + lam * (Tx - problem.operator(y)), y


def rhs_fbf(problem, x, lam):
    """Velocity of the FBF flow at ``x``; returns ``(dx, y)``."""
    if not lam > 0:
        raise InvalidArgumentError(f"lambda must be positive, got {lam}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y, Tx = problem.prox_step(x, lam)
    return y - x + lam * (Tx - problem.operator(y)), y


def rhs_proxgrad(problem, x, lam, delta=1.0):
    if not (lam > 0 and delta > 0):
        raise InvalidArgumentError("lambda and delta must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y, _ = problem.prox_step(x, lam)
    return -delta * (x - y)


def integrate(problem, flow, stop_tol=1e-8, scheme="euler"):
    """Integrate a flow with a fixed step.

    The explicit Euler step for the FBF flow is evaluated as
    ``(1 - dt) x + dt (y + lam (T x - T y))`` so that ``dt = 1`` reproduces
    the discrete Tseng iteration bit for bit.

    Stops when ``||x - y|| <= stop_tol`` or at ``t_end``. Every
    ``record_stride``-th state is recorded, plus the final one.
    """
    if scheme not in SCHEMES:
        raise InvalidArgumentError(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    if flow.x0.shape != (problem.dim,):
        raise InvalidArgumentError(f"x0 has shape {flow.x0.shape}, expected ({problem.dim},)")
    if stop_tol < 0:
        raise InvalidArgumentError("stop_tol must be nonnegative")
    lam, dt, stride = flow.lam, flow.dt, flow.record_stride
    fbf = flow.system == "fbf"
    if fbf and not flow.allow_invalid_lambda:
        check_lambda(problem, lam)
    n_steps = int(round(flow.t_end / dt))
    xbar = problem.known_solution

    times, xs, ys, res = [], [], [], []

    def record_so_far(reason, steps):
        return _make_record(times, xs, ys, res, xbar, dt, steps, reason, lam, problem.dim)

    if fbf:
        def velocity(v):
            y, Tv = problem.prox_step(v, lam)
            return y - v + lam * (Tv - problem.operator(y))
    else:
        delta = flow.delta

        def velocity(v):
            y, _ = problem.prox_step(v, lam)
            return -delta * (v - y)

    x = flow.x0.copy()
    reason = "horizon"
    k = 0
    while True:
        y, Tx = problem.prox_step(x, lam)
        r = float(np.sqrt(np.dot(x - y, x - y)))
        if not np.isfinite(r):
            raise DivergenceError(k, record=record_so_far("divergence", k))
        stop = r <= stop_tol
        if stop or k == n_steps or k % stride == 0:
            times.append(k * dt)
            xs.append(x)
            ys.append(y)
            res.append(r)
        if stop:
            reason = "tolerance"
            break
        if k == n_steps:
            break
        if scheme == "euler":
            if fbf:
                x = (1.0 - dt) * x + dt * (y + lam * (Tx - problem.operator(y)))
            else:
                x = x + dt * (-flow.delta * (x - y))
        else:
            k1 = y - x + lam * (Tx - problem.operator(y)) if fbf else -flow.delta * (x - y)
            k2 = velocity(x + 0.5 * dt * k1)
            k3 = velocity(x + 0.5 * dt * k2)
            k4 = velocity(x + dt * k3)
            x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        k += 1
        if not np.all(np.isfinite(x)):
            raise DivergenceError(k, record=record_so_far("divergence", k))
    return record_so_far(reason, k)


def _make_record(times, xs, ys, res, xbar, dt, steps, reason, lam, n):
    xs_arr = np.array(xs).reshape(len(xs), n)
    lyap = None
    if xbar is not None:
        d = xs_arr - xbar
        lyap = np.einsum("ij,ij->i", d, d)
    return TrajectoryRecord(
        times=np.array(times),
        xs=xs_arr,
        ys=np.array(ys).reshape(len(ys), n),
        residuals=np.array(res),
        lyapunov=lyap,
        dt=dt,
        steps=steps,
        stop_reason=reason,
        lam=lam,
    )


def euler_equiv_check(problem, lam, steps, x0):
    """True iff Euler with ``dt = 1`` matches the Tseng iteration exactly."""
    from .discrete import IterSpec, iterate

    if steps < 1:
        raise InvalidArgumentError("steps must be >= 1")
    flow = FlowSpec(lam=lam, x0=x0, t_end=float(steps), dt=1.0, allow_invalid_lambda=True)
    traj = integrate(problem, flow, stop_tol=0.0, scheme="euler")
    report = iterate(problem, IterSpec(method="tseng", lam=lam, max_iters=steps, tol=0.0, x0=x0))
    hist = report.history
    return (
        traj.xs.shape == hist.xs.shape
        and bool(np.array_equal(traj.xs, hist.xs))
        and bool(np.array_equal(traj.ys, hist.ys))
    )
