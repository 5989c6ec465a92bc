"""Problem data model for mixed variational inequalities.

A problem couples an operator ``T`` with a convex ``h`` (given by its prox)
and asks for ``x`` with ``<T x, u - x> + h(u) - h(x) >= 0`` for all ``u``.
Operators accept a single vector or a batch with the dimension on the last
axis.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import prox as proxlib
from .errors import InvalidArgumentError


def _frozen_array(obj, name, value):
    arr = np.array(value, dtype=float)
    arr.setflags(write=False)
    object.__setattr__(obj, name, arr)
    return arr


@dataclass(frozen=True, eq=False)
class Affine:
    """``T(x) = A x + b``."""

    matrix: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        A = _frozen_array(self, "matrix", np.atleast_2d(self.matrix))
        b = _frozen_array(self, "offset", np.atleast_1d(self.offset))
        if A.shape != (b.size, b.size):
            raise InvalidArgumentError(f"matrix shape {A.shape} does not match offset size {b.size}")

    @property
    def dim(self):
        return self.offset.size

    def __call__(self, x):
        return x @ self.matrix.T + self.offset


@dataclass(frozen=True, eq=False)
class ScaledMatrixGaussian:
    """``T(x) = (exp(-||x||**2) + q) M x``."""

    matrix: np.ndarray
    shift: float

    def __post_init__(self):
        M = _frozen_array(self, "matrix", np.atleast_2d(self.matrix))
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise InvalidArgumentError(f"matrix must be square, got {M.shape}")
        if not self.shift > 0:
            raise InvalidArgumentError(f"shift q must be positive, got {self.shift}")

    @property
    def dim(self):
        return self.matrix.shape[0]

    def __call__(self, x):
        scale = np.exp(-np.sum(x * x, axis=-1)) + self.shift
        return np.multiply(scale[..., None], x @ self.matrix.T)


@dataclass(frozen=True, eq=False)
class LogisticGradient:
    """Gradient of ``sum_i log(1 + exp(-a_i <b_i, x>))``.

    ``labels`` holds the ``a_i`` (each +1 or -1), ``features`` the rows
    ``b_i``.
    """

    labels: np.ndarray
    features: np.ndarray

    def __post_init__(self):
        a = _frozen_array(self, "labels", np.ravel(self.labels))
        B = _frozen_array(self, "features", np.atleast_2d(self.features))
        if B.shape[0] != a.size:
            raise InvalidArgumentError(f"{a.size} labels for {B.shape[0]} feature rows")
        if not np.all(np.isin(a, (-1.0, 1.0))):
            raise InvalidArgumentError("labels must be +1 or -1")

    @property
    def dim(self):
        return self.features.shape[1]

    def margins(self, x):
        return (x @ self.features.T) * self.labels

    def __call__(self, x):
        # sigma(-m) = exp(-log(1 + e^m)), stable for either sign of m
        s = np.exp(-np.logaddexp(0.0, self.margins(x)))
        return -(s * self.labels) @ self.features


OPERATOR_TYPES = (Affine, ScaledMatrixGaussian, LogisticGradient)


def eval_operator(spec, x):
    """Evaluate ``T(x)``; ``x`` may be a vector or a batch of row vectors."""
    if not isinstance(spec, OPERATOR_TYPES):
        raise InvalidArgumentError(f"unknown operator {spec!r}")
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape[-1] != spec.dim:
        raise InvalidArgumentError(f"x has dimension {x.shape[-1]}, operator expects {spec.dim}")
    return spec(x)


@dataclass(frozen=True, eq=False)
class MviProblem:
    dim: int
    operator: object
    prox: object
    known_solution: Optional[np.ndarray] = None
    lipschitz_beta: Optional[float] = None
    strong_pseudo_mu: Optional[float] = None
    name: str = "custom"

    def __post_init__(self):
        if not (isinstance(self.dim, (int, np.integer)) and self.dim > 0):
            raise InvalidArgumentError(f"dim must be a positive integer, got {self.dim}")
        if self.operator.dim != self.dim:
            raise InvalidArgumentError(f"operator dimension {self.operator.dim} != dim {self.dim}")
        if not isinstance(self.prox, proxlib.PROX_TYPES):
            raise InvalidArgumentError(f"unknown prox spec {self.prox!r}")
        if isinstance(self.prox, proxlib.IndicatorBoxHyperplane):
            self.prox.check_dim(self.dim)
        if self.known_solution is not None:
            xs = _frozen_array(self, "known_solution", np.atleast_1d(self.known_solution))
            if xs.shape != (self.dim,):
                raise InvalidArgumentError("known_solution has the wrong dimension")
            if not self.prox.contains(xs, tol=1e-9):
                raise InvalidArgumentError("known_solution lies outside dom h")
        for field in ("lipschitz_beta", "strong_pseudo_mu"):
            value = getattr(self, field)
            if value is not None and not value > 0:
                raise InvalidArgumentError(f"{field} must be positive, got {value}")

    def T(self, x):
        return eval_operator(self.operator, x)

    def prox_step(self, x, lam):
        """``prox_{lam h}(x - lam T(x))``, also returning ``T(x)``."""
        Tx = self.operator(x)
        return self.prox._prox(x - lam * Tx, lam), Tx


@dataclass(frozen=True)
class SolutionResidual:
    natural_residual: float
    lambda_used: float


def fbf_residual(problem, x, lam):
    """Natural residual ``||x - prox_{lam h}(x - lam T x)||``.

    Zero exactly at solutions of the variational inequality.
    """
    if not lam > 0:
        raise InvalidArgumentError(f"lambda must be positive, got {lam}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = proxlib.prox(problem.prox, x - lam * problem.T(x), lam)
    return SolutionResidual(float(np.linalg.norm(x - y)), float(lam))
