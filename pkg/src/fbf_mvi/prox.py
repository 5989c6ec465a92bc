"""Closed-form proximal operators and a brute-force reference.

Every spec computes ``argmin_v lam * h(v) + 0.5 * ||z - v||**2`` for one of
the convex functions ``h`` used by the built-in problems:

=========================  ==============================================
``QuadraticOnInterval``    ``h(x) = ||x||**2`` on ``[lo, hi]**n``
``IndicatorBoxHyperplane`` indicator of ``[lo, hi]**n ∩ {sum(x) = s}``
``ScaledL1``               ``h(x) = eta * ||x||_1``
``IndicatorInterval``      indicator of ``[lo, hi]**n``
``Zero``                   ``h = 0``
=========================  ==============================================
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, OracleError, SamplingError

__all__ = [
    "QuadraticOnInterval",
    "IndicatorBoxHyperplane",
    "ScaledL1",
    "IndicatorInterval",
    "Zero",
    "prox",
    "prox_oracle",
    "h_value",
]

FEAS_TOL = 1e-12
SMALL_N = 16


def _check_interval(lo, hi):
    if not (np.isfinite(lo) and np.isfinite(hi)) or not lo < hi:
        raise InvalidArgumentError(f"need finite lo < hi, got lo={lo}, hi={hi}")


class _BoxMixin:
    """Shared helpers for specs whose domain is the box ``[lo, hi]**n``."""

    def bounds(self):
        return self.lo, self.hi

    def contains(self, x, tol=FEAS_TOL):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def restrict(self, pts):
        inside = np.all((pts >= self.lo) & (pts <= self.hi), axis=-1)
        return pts[inside]


@dataclass(frozen=True)
class QuadraticOnInterval(_BoxMixin):
    lo: float
    hi: float

    def __post_init__(self):
        _check_interval(self.lo, self.hi)

    def _prox(self, z, lam):
        return np.clip(z / (1.0 + 2.0 * lam), self.lo, self.hi)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.all((x >= self.lo - FEAS_TOL) & (x <= self.hi + FEAS_TOL), axis=-1)
        return np.where(inside, np.sum(x * x, axis=-1), np.inf)

    def _scalar_objective(self, v, zi, lam):
        f = lam * v * v + 0.5 * (zi - v) ** 2
        return np.where((v >= self.lo) & (v <= self.hi), f, np.inf)


@dataclass(frozen=True)
class IndicatorInterval(_BoxMixin):
    lo: float
    hi: float

    def __post_init__(self):
        _check_interval(self.lo, self.hi)

    def _prox(self, z, lam):
        return np.clip(z, self.lo, self.hi)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.all((x >= self.lo - FEAS_TOL) & (x <= self.hi + FEAS_TOL), axis=-1)
        return np.where(inside, 0.0, np.inf)

    def _scalar_objective(self, v, zi, lam):
        f = 0.5 * (zi - v) ** 2
        return np.where((v >= self.lo) & (v <= self.hi), f, np.inf)


@dataclass(frozen=True)
class IndicatorBoxHyperplane(_BoxMixin):
    """Indicator of ``{x in [lo, hi]**n : sum(x) = target_sum}``.

    Feasibility (``n*lo <= target_sum <= n*hi``) depends on ``n`` and is
    checked once a dimension is known.
    """

    lo: float
    hi: float
    target_sum: float = 0.0

    def __post_init__(self):
        _check_interval(self.lo, self.hi)

    def check_dim(self, n):
        if not n * self.lo <= self.target_sum <= n * self.hi:
            raise InvalidArgumentError(
                f"target_sum={self.target_sum} infeasible for n={n} on [{self.lo}, {self.hi}]"
            )

    def contains(self, x, tol=FEAS_TOL):
        x = np.asarray(x, dtype=float)
        return super().contains(x, tol) and abs(float(np.sum(x)) - self.target_sum) <= tol * max(1, x.size)

    def restrict(self, pts):
        # the hyperplane has measure zero, so project instead of rejecting
        return np.array([self._prox(p, 1.0) for p in pts]).reshape(pts.shape)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.all((x >= self.lo - FEAS_TOL) & (x <= self.hi + FEAS_TOL), axis=-1)
        inside &= np.abs(np.sum(x, axis=-1) - self.target_sum) <= 1e-9
        return np.where(inside, 0.0, np.inf)

    def _prox(self, z, lam):
        return project_box_hyperplane(z, self.lo, self.hi, self.target_sum)


@dataclass(frozen=True)
class ScaledL1:
    eta: float

    def __post_init__(self):
        if not self.eta > 0:
            raise InvalidArgumentError(f"eta must be positive, got {self.eta}")

    def bounds(self):
        return None

    def contains(self, x, tol=FEAS_TOL):
        return bool(np.all(np.isfinite(x)))

    def restrict(self, pts):
        return pts

    def _prox(self, z, lam):
        # exact zero at the kink: max(., 0) never returns -0 magnitudes
        return np.sign(z) * np.maximum(np.abs(z) - lam * self.eta, 0.0)

    def value(self, x):
        return self.eta * np.sum(np.abs(np.asarray(x, dtype=float)), axis=-1)

    def _scalar_objective(self, v, zi, lam):
        return lam * self.eta * np.abs(v) + 0.5 * (zi - v) ** 2


@dataclass(frozen=True)
class Zero:
    def bounds(self):
        return None

    def contains(self, x, tol=FEAS_TOL):
        return bool(np.all(np.isfinite(x)))

    def restrict(self, pts):
        return pts

    def _prox(self, z, lam):
        return z.copy()

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1]) if x.ndim else 0.0

    def _scalar_objective(self, v, zi, lam):
        return 0.5 * (zi - v) ** 2


PROX_TYPES = (QuadraticOnInterval, IndicatorBoxHyperplane, ScaledL1, IndicatorInterval, Zero)


def project_box_hyperplane(z, lo, hi, target, max_iter=200, tol=1e-12):
    """Euclidean projection of ``z`` onto ``[lo, hi]**n ∩ {sum = target}``.

    The projection is ``clip(z - tau, lo, hi)`` for the scalar ``tau`` that
    fixes the sum. ``tau`` is bracketed in ``[min(z) - hi, max(z) - lo]`` and
    bisected; at each midpoint the clamp pattern is tried as an active set
    and, when self-consistent, gives ``tau`` in closed form.
    """
    z = np.asarray(z, dtype=float)
    n = z.size
    if n <= SMALL_N:
        return np.array(_project_small(z.tolist(), lo, hi, target, max_iter, tol))
    a = z.min() - hi
    b = z.max() - lo
    for _ in range(max_iter):
        tau = 0.5 * (a + b)
        w = z - tau
        at_lo = w <= lo
        at_hi = w >= hi
        free = ~(at_lo | at_hi)
        s = np.clip(w, lo, hi).sum()
        if abs(s - target) < tol:
            return np.clip(w, lo, hi)
        nf = np.count_nonzero(free)
        if nf:
            n_lo = np.count_nonzero(at_lo)
            tau_f = (z[free].sum() + lo * n_lo + hi * (n - n_lo - nf) - target) / nf
            wf = z - tau_f
            if (
                np.all(wf[at_lo] <= lo)
                and np.all(wf[at_hi] >= hi)
                and np.all((wf[free] >= lo) & (wf[free] <= hi))
            ):
                return np.clip(wf, lo, hi)
        if s > target:
            a = tau
        else:
            b = tau
    out = np.clip(z - 0.5 * (a + b), lo, hi)
    assert abs(out.sum() - target) < 1e-9, "box-hyperplane bisection failed to bracket"
    return out



def _project_small(z, lo, hi, target, max_iter, tol):
    # same bisection on plain floats; numpy call overhead dominates for tiny n
    n = len(z)
    a = min(z) - hi
    b = max(z) - lo
    for _ in range(max_iter):
        tau = 0.5 * (a + b)
        s = 0.0
        free_sum = 0.0
        n_lo = n_hi = 0
        for zi in z:
            w = zi - tau
            if w <= lo:
                s += lo
                n_lo += 1
            elif w >= hi:
                s += hi
                n_hi += 1
            else:
                s += w
                free_sum += zi
        if abs(s - target) < tol:
            return [min(max(zi - tau, lo), hi) for zi in z]
        nf = n - n_lo - n_hi
        if nf:
            tau_f = (free_sum + lo * n_lo + hi * n_hi - target) / nf
            consistent = True
            for zi in z:
                w, wf = zi - tau, zi - tau_f
                if w <= lo:
                    ok = wf <= lo
                elif w >= hi:
                    ok = wf >= hi
                else:
                    ok = lo <= wf <= hi
                if not ok:
                    consistent = False
                    break
            if consistent:
                return [min(max(zi - tau_f, lo), hi) for zi in z]
        if s > target:
            a = tau
        else:
            b = tau
    out = [min(max(zi - 0.5 * (a + b), lo), hi) for zi in z]
    assert abs(sum(out) - target) < 1e-9, "box-hyperplane bisection failed to bracket"
    return out


def _as_vector(z):
    z = np.asarray(z, dtype=float)
    if z.ndim == 0:
        z = z.reshape(1)
    if z.ndim != 1:
        raise InvalidArgumentError(f"expected a vector, got shape {z.shape}")
    return z


def _check_args(spec, z, lam):
    if not isinstance(spec, PROX_TYPES):
        raise InvalidArgumentError(f"unknown prox spec {spec!r}")
    if not lam > 0:
        raise InvalidArgumentError(f"lambda must be positive, got {lam}")
    z = _as_vector(z)
    if not np.all(np.isfinite(z)):
        raise InvalidArgumentError("prox input must be finite")
    if isinstance(spec, IndicatorBoxHyperplane):
        spec.check_dim(z.size)
    return z


def prox(spec, z, lam):
    """Evaluate ``prox_{lam h}(z)`` in closed form."""
    z = _check_args(spec, z, lam)
    return spec._prox(z, lam)


def h_value(spec, x):
    """``h(x)``, with ``inf`` outside the domain."""
    return spec.value(x)


def _grid_argmin_1d(f, a, b, resolution, points=201):
    # convex f: the minimiser stays between the grid neighbours of the best node
    while True:
        grid = np.linspace(a, b, points)
        vals = f(grid)
        k = int(np.argmin(vals))
        if not np.isfinite(vals[k]):
            raise OracleError("grid search found no finite objective value")
        if grid[1] - grid[0] <= resolution:
            return grid[k]
        a = grid[max(k - 1, 0)]
        b = grid[min(k + 1, points - 1)]


def _dykstra_box_hyperplane(spec, z, resolution, max_iter=100_000):
    n = z.size
    x = z.copy()
    p = np.zeros(n)
    q = np.zeros(n)
    for _ in range(max_iter):
        y = np.clip(x + p, spec.lo, spec.hi)
        p = x + p - y
        u = y + q
        x_new = u - (u.sum() - spec.target_sum) / n
        q = u - x_new
        if np.max(np.abs(x_new - x)) <= 1e-15 and np.max(np.abs(x_new - y)) <= 1e-13:
            return x_new
        x = x_new
    if np.max(np.abs(x - y)) > resolution:
        raise OracleError("Dykstra projection did not converge")
    return x


def _projected_subgradient(spec, z, lam, resolution, iters=100_000):
    # step 1/(k+1) on a 1-strongly convex objective: v_k is a running average
    bounds = spec.bounds()
    v = z.copy()
    moves = []
    for k in range(iters):
        if isinstance(spec, ScaledL1):
            g = lam * spec.eta * np.sign(v)
        elif isinstance(spec, QuadraticOnInterval):
            g = 2.0 * lam * v
        else:
            g = 0.0
        v_new = v - (g + v - z) / (k + 1)
        if bounds is not None:
            v_new = np.clip(v_new, *bounds)
        if k >= iters - 100:
            moves.append(np.max(np.abs(v_new - v)))
        v = v_new
    if max(moves) > 100 * resolution:
        raise OracleError("projected subgradient descent did not converge")
    return v


def prox_oracle(spec, z, lam, resolution=1e-6):
    """Brute-force ``argmin_v lam*h(v) + 0.5*||z - v||**2``.

    Separable specs with ``n <= 3`` are minimised coordinate-wise by a
    refining grid whose final spacing is ``resolution``. The box-hyperplane
    indicator is handled by Dykstra's alternating projections, which shares
    no code with the bisection in :func:`prox`. For ``n > 3`` separable specs
    fall back to 1e5 steps of projected subgradient descent.
    """
    z = _check_args(spec, z, lam)
    if not resolution > 0:
        raise InvalidArgumentError("resolution must be positive")
    if isinstance(spec, IndicatorBoxHyperplane):
        return _dykstra_box_hyperplane(spec, z, resolution)
    if z.size > 3:
        return _projected_subgradient(spec, z, lam, resolution)
    out = np.empty_like(z)
    bounds = spec.bounds()
    for i, zi in enumerate(z):
        if bounds is not None:
            a, b = bounds
        else:
            a, b = min(zi, 0.0) - 1.0, max(zi, 0.0) + 1.0
        out[i] = _grid_argmin_1d(lambda v: spec._scalar_objective(v, zi, lam), a, b, resolution)
    return out


def sample_domain(spec, rng, lo, hi, n, k, min_hit_rate=0.1):
    """Draw ``k`` points of ``dom h`` inside the box ``[lo, hi]**n``.

    Points are drawn uniformly from the box and either rejected (box-type
    domains) or projected (the hyperplane). Raises :class:`SamplingError`
    when fewer than ``min_hit_rate`` of the draws land in the domain.
    """
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (n,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (n,))
    if np.any(hi <= lo):
        raise InvalidArgumentError("degenerate sampling box")
    want = k
    out = []
    drawn = 0
    while want > 0:
        batch = max(want, 64)
        pts = rng.uniform(lo, hi, size=(batch, n))
        drawn += batch
        kept = spec.restrict(pts)
        if drawn >= 10 * k and sum(len(o) for o in out) + len(kept) < min_hit_rate * drawn:
            raise SamplingError(
                f"only {sum(len(o) for o in out) + len(kept)} of {drawn} samples fell in dom h"
            )
        out.append(kept[:want])
        want -= len(out[-1])
        if drawn >= 10 * k and want > 0 and len(kept) == 0:
            raise SamplingError("sampling box does not meet dom h")
    return np.concatenate(out, axis=0)
