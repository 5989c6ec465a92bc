"""Operator classification, stability certificates and trajectory checks.

Sampling can only falsify monotonicity-type properties or bound constants
from one side: a sampled Lipschitz ratio is a lower bound on the true
constant, and a sampled strong-pseudomonotonicity modulus is an upper bound
on the true infimum.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Affine, ScaledMatrixGaussian, eval_operator
from .errors import InvalidArgumentError
from .prox import sample_domain
from .report import MonitorVerdict

CLASSES = ("monotone", "pseudomonotone", "h_pseudomonotone", "h_strongly_pseudomonotone")
VIOLATION_TOL = 1e-12
MIN_PAIR_DIST = 1e-9
DEFAULT_BOX = (-5.0, 5.0)


def default_box(problem):
    """Sampling box: the bounds of ``dom h`` when it has them, else ``[-5, 5]**n``."""
    bounds = problem.prox.bounds()
    lo, hi = bounds if bounds is not None else DEFAULT_BOX
    n = problem.dim
    return np.full(n, float(lo)), np.full(n, float(hi))


def _box(domain, n):
    lo, hi = domain
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (n,)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (n,)).copy()
    if not np.all(hi > lo):
        raise InvalidArgumentError("degenerate sampling domain")
    return lo, hi


def spectral_norm(A, tol=1e-10, max_iter=100_000):
    """Largest singular value of ``A`` by power iteration on ``A^T A``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = A.T @ A
    n = B.shape[0]
    best = 0.0
    # a few fixed starts so no single one is orthogonal to the top vector
    starts = [np.ones(n), np.cos(np.arange(1, n + 1)), np.arange(1, n + 1) ** 0.5 * (-1.0) ** np.arange(n)]
    for v in starts:
        nv = np.linalg.norm(v)
        if nv == 0:
            continue
        v = v / nv
        est = float(v @ B @ v)
        for _ in range(max_iter):
            w = B @ v
            nw = np.linalg.norm(w)
            if nw == 0.0:
                est = 0.0
                break
            v = w / nw
            new = float(v @ B @ v)
            if abs(new - est) <= tol * max(new, 1.0):
                est = new
                break
            est = new
        best = max(best, est)
    return float(np.sqrt(best))


def estimate_lipschitz(spec, domain, samples=100_000, seed=0):
    """Largest ``||T u - T v|| / ||u - v||`` over sampled pairs in a box.

    Affine operators return the spectral norm of the matrix instead. Half the
    pairs are independent uniform draws; the other half are local
    perturbations at log-uniform scales, which probe the derivative.
    """
    if samples < 2:
        raise InvalidArgumentError("need at least 2 samples")
    lo, hi = _box(domain, spec.dim)
    if isinstance(spec, Affine):
        return spectral_norm(spec.matrix)
    rng = np.random.default_rng(seed)
    n = spec.dim
    n_far = samples // 2
    n_near = samples - n_far
    u = rng.uniform(lo, hi, size=(samples, n))
    v = np.empty_like(u)
    v[:n_far] = rng.uniform(lo, hi, size=(n_far, n))
    d = rng.normal(size=(n_near, n))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    scale = np.linalg.norm(hi - lo) * 10.0 ** rng.uniform(-6.0, 0.0, size=(n_near, 1))
    v[n_far:] = np.clip(u[n_far:] + scale * d, lo, hi)
    dist = np.linalg.norm(u - v, axis=1)
    ok = dist > 0
    ratios = np.linalg.norm(eval_operator(spec, u[ok]) - eval_operator(spec, v[ok]), axis=1) / dist[ok]
    return float(ratios.max()) if ratios.size else 0.0


def gaussian_lipschitz_bound(spec):
    """Upper bound ``(1 + q + 2/e) ||M||`` for ``T(x) = (exp(-||x||^2)+q) M x``.

    From ``J = (exp(-r^2) + q) M - 2 exp(-r^2) M x x^T`` and
    ``r^2 exp(-r^2) <= 1/e``.
    """
    if not isinstance(spec, ScaledMatrixGaussian):
        raise InvalidArgumentError("bound applies only to ScaledMatrixGaussian")
    return (1.0 + spec.shift + 2.0 / np.e) * spectral_norm(spec.matrix)


def charpoly(M):
    """Characteristic polynomial coefficients (Faddeev-LeVerrier), highest first."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n = M.shape[0]
    coeffs = [1.0]
    Mk = np.zeros_like(M)
    I = np.eye(n)
    for k in range(1, n + 1):
        Mk = M @ Mk + coeffs[-1] * I
        coeffs.append(-np.trace(M @ Mk) / k)
    return np.array(coeffs)


def lambda_min(M):
    """Smallest eigenvalue of a symmetric matrix via its characteristic polynomial."""
    roots = np.roots(charpoly(M))
    return float(np.min(roots.real))


@dataclass
class Witness:
    u: list
    v: list
    value: float
    antecedent: Optional[float] = None


@dataclass
class MonotonicityVerdict:
    class_flags: dict
    witnesses: dict = field(default_factory=dict)
    mu_estimate: Optional[float] = None
    samples_used: int = 0


def _pair_terms(problem, U, V, with_h=True):
    T = problem.operator
    TU, TV = T(U), T(V)
    D = V - U
    dh = 0.0
    if with_h:
        # pairs outside dom h give inf - inf; callers mask them out
        with np.errstate(invalid="ignore"):
            dh = np.asarray(problem.prox.value(V), dtype=float) - np.asarray(problem.prox.value(U), dtype=float)
    mono = -np.einsum("ij,ij->i", TU - TV, D)
    ante = np.einsum("ij,ij->i", TU, D)
    cons = np.einsum("ij,ij->i", TV, D)
    return {
        "mono": mono,
        "ante": ante,
        "cons": cons,
        "ante_h": ante + dh,
        "cons_h": cons + dh,
        "dist2": np.einsum("ij,ij->i", D, D),
    }


def _first_violation(U, V, values, mask, ante=None):
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return None
    i = idx[0]
    return Witness(U[i].tolist(), V[i].tolist(), float(values[i]), None if ante is None else float(ante[i]))


def classify_monotonicity(problem, domain=None, samples=10_000, seed=0, probes=None):
    """Empirically test the monotonicity family on pairs drawn from ``dom h``.

    Each definition is an implication checked on ordered pairs ``(u, v)``:

    * monotone: ``<T u - T v, u - v> >= 0``
    * pseudomonotone: ``<T u, v-u> >= 0  =>  <T v, v-u> >= 0``
    * h-pseudomonotone: both sides gain ``h(v) - h(u)``
    * h-strongly pseudomonotone: the conclusion becomes ``>= mu ||u-v||^2``

    ``probes`` are extra pairs checked before the random ones, so a known
    counterexample becomes the recorded witness. Probes outside ``dom h``
    only enter the two classes that do not involve ``h``. The strong modulus
    is estimated as the smallest ``conclusion / ||u - v||^2`` over pairs
    meeting the antecedent.
    """
    n = problem.dim
    lo, hi = _box(domain if domain is not None else default_box(problem), n)
    rng = np.random.default_rng(seed)
    pts = sample_domain(problem.prox, rng, lo, hi, n, 2 * samples)
    U, V = pts[:samples], pts[samples:]
    U, V = np.concatenate([U, V]), np.concatenate([V, U])

    PU = np.zeros((0, n))
    PV = np.zeros((0, n))
    if probes:
        PU = np.array([np.atleast_1d(np.asarray(p[0], dtype=float)) for p in probes])
        PV = np.array([np.atleast_1d(np.asarray(p[1], dtype=float)) for p in probes])
        PU, PV = np.concatenate([PU, PV]), np.concatenate([PV, PU])

    flags, witnesses = {}, {}

    # classes without h use every probe
    AU, AV = np.concatenate([PU, U]), np.concatenate([PV, V])
    t = _pair_terms(problem, AU, AV, with_h=False)
    bad = t["mono"] < -VIOLATION_TOL
    flags["monotone"] = not bad.any()
    if bad.any():
        witnesses["monotone"] = _first_violation(AU, AV, t["mono"], bad)
    bad = (t["ante"] >= 0) & (t["cons"] < -VIOLATION_TOL)
    flags["pseudomonotone"] = not bad.any()
    if bad.any():
        witnesses["pseudomonotone"] = _first_violation(AU, AV, t["cons"], bad, t["ante"])

    # classes with h use probes inside dom h only
    keep = np.array([problem.prox.contains(a) and problem.prox.contains(b) for a, b in zip(PU, PV)], dtype=bool)
    HU, HV = np.concatenate([PU[keep], U]), np.concatenate([PV[keep], V])
    t = _pair_terms(problem, HU, HV)
    accepted = t["ante_h"] >= 0
    bad = accepted & (t["cons_h"] < -VIOLATION_TOL)
    flags["h_pseudomonotone"] = not bad.any()
    if bad.any():
        witnesses["h_pseudomonotone"] = _first_violation(HU, HV, t["cons_h"], bad, t["ante_h"])

    strong = accepted & (t["dist2"] > MIN_PAIR_DIST**2)
    mu = None
    if strong.any():
        ratios = np.where(strong, t["cons_h"] / np.where(strong, t["dist2"], 1.0), np.inf)
        i = int(np.argmin(ratios))
        if ratios[i] > 0:
            mu = float(ratios[i])
        else:
            witnesses["h_strongly_pseudomonotone"] = Witness(
                HU[i].tolist(), HV[i].tolist(), float(t["cons_h"][i]), float(t["ante_h"][i])
            )
    flags["h_strongly_pseudomonotone"] = mu is not None
    return MonotonicityVerdict(flags, witnesses, mu, samples_used=len(U) + len(PU))


def witness_violates(problem, cls, w, tol=1e-9):
    """Re-evaluate a stored witness against its class definition."""
    u = np.atleast_1d(np.asarray(w.u, dtype=float))
    v = np.atleast_1d(np.asarray(w.v, dtype=float))
    t = {k: float(a[0]) for k, a in _pair_terms(problem, u[None], v[None]).items()}
    if cls == "monotone":
        return t["mono"] < 0 and abs(t["mono"] - w.value) <= tol
    if cls == "pseudomonotone":
        return t["ante"] >= 0 and t["cons"] < 0 and abs(t["cons"] - w.value) <= tol
    if cls == "h_pseudomonotone":
        return t["ante_h"] >= 0 and t["cons_h"] < 0 and abs(t["cons_h"] - w.value) <= tol
    if cls == "h_strongly_pseudomonotone":
        return t["ante_h"] >= 0 and t["cons_h"] <= 0 and abs(t["cons_h"] - w.value) <= tol
    raise InvalidArgumentError(f"unknown class {cls!r}")


@dataclass
class StabilityCertificate:
    beta: float
    mu: float
    lam: float
    alpha: float
    lambda_valid: bool


def certificate_alpha(beta, mu, lam):
    """``2 [1 - lam (1 + beta^2)] (lam mu / (1 + lam (mu + beta)))^2``."""
    gap = 1.0 - lam * (1.0 + beta**2)
    return 2.0 * gap * (lam * mu / (1.0 + lam * (mu + beta))) ** 2


def make_certificate(beta, mu, lam):
    """Exponential decay rate of ``||x(t) - x*||^2``; zero when ``lam`` is out of range."""
    for name, val in (("beta", beta), ("mu", mu), ("lambda", lam)):
        if not val > 0:
            raise InvalidArgumentError(f"{name} must be positive, got {val}")
    valid = lam * (1.0 + beta**2) < 1.0
    alpha = certificate_alpha(beta, mu, lam) if valid else 0.0
    return StabilityCertificate(float(beta), float(mu), float(lam), float(alpha), bool(valid))


@dataclass
class DecayVerdict:
    holds: bool
    step: Optional[int]
    margin: float
    fitted_rate: Optional[float]
    alpha: float


def fitted_decay_rate(times, lyap, floor=1e-20):
    keep = lyap > floor
    if np.count_nonzero(keep) < 2 or np.ptp(times[keep]) == 0:
        return None
    slope = np.polyfit(times[keep], np.log(lyap[keep]), 1)[0]
    return float(-slope)


def verify_decay(record, cert, tol_rel=1e-2):
    """Check ``L(t_k) <= L(0) exp(-alpha t_k) (1 + tol_rel)`` at every record.

    ``L`` is the recorded squared distance to the known solution. The
    least-squares decay rate of ``log L`` (values above 1e-20) must also be
    at least ``alpha``.
    """
    if record.lyapunov is None:
        raise InvalidArgumentError("record has no Lyapunov values (no known solution)")
    if not cert.lambda_valid:
        raise InvalidArgumentError("certificate lambda is outside the valid range")
    L = np.asarray(record.lyapunov, dtype=float)
    t = np.asarray(record.times, dtype=float)
    bound = L[0] * np.exp(-cert.alpha * t) * (1.0 + tol_rel)
    slack = bound - L
    bad = np.flatnonzero(slack < 0)
    rate = fitted_decay_rate(t, L)
    step = int(bad[0]) if bad.size else None
    holds = step is None and (rate is None or rate >= cert.alpha)
    return DecayVerdict(holds, step, float(slack.min()), rate, cert.alpha)


def verify_trajectory_inequalities(problem, record, lam, beta):
    """Re-check the Lyapunov-type inequalities along a stored trajectory.

    ``velocity_bound``
        ``||x'|| <= (1 + lam beta) ||x - y||`` at every record.
    ``lyapunov_nonincrease``
        ``||x - x*||^2`` does not increase between records beyond the Euler
        excess ``10 dt (t_{k+1} - t_k) (1 + lam beta)^2 ||x_k - y_k||^2``.
    ``residual_integral``
        ``int ||x - y||^2 dt <= ||x0 - x*||^2 / (2 (1 - lam (1 + beta^2))) + 1e-6``
        by the trapezoid rule.

    The last two need a known solution and are omitted without one.
    """
    out = {}
    X, Y = record.xs, record.ys
    T = problem.operator
    dx = Y - X + lam * (T(X) - T(Y))
    speed = np.linalg.norm(dx, axis=1)
    r = np.linalg.norm(X - Y, axis=1)
    margin = (1.0 + lam * beta) * r + 1e-12 - speed
    out["velocity_bound"] = MonitorVerdict(bool(np.all(margin >= 0)), float(margin.min()))

    if record.lyapunov is None:
        return out
    L = record.lyapunov
    if len(L) > 1:
        dt = record.dt if np.isfinite(record.dt) else np.min(np.diff(record.times))
        gaps = np.diff(record.times)
        slack = 10.0 * dt * gaps * (1.0 + lam * beta) ** 2 * r[:-1] ** 2 + 4 * np.finfo(float).eps * L[:-1]
        inc = slack - np.diff(L)
        i = int(np.argmin(inc))
        out["lyapunov_nonincrease"] = MonitorVerdict(
            bool(inc[i] >= 0), float(inc[i]), "" if inc[i] >= 0 else f"increase at record {i + 1}"
        )
    else:
        out["lyapunov_nonincrease"] = MonitorVerdict(True, 0.0, "single record")

    gap = 1.0 - lam * (1.0 + beta**2)
    integral = float(np.trapezoid(r**2, record.times)) if len(r) > 1 else 0.0
    if gap <= 0:
        out["residual_integral"] = MonitorVerdict(False, float("nan"), "requires lambda*(1+beta^2) < 1")
    else:
        bound = L[0] / (2.0 * gap) + 1e-6
        out["residual_integral"] = MonitorVerdict(bool(integral <= bound), float(bound - integral))
    return out
