"""Built-in test problems.

``ex1``
    ``T(u) = 4 - u`` with ``h(u) = u**2`` on ``[3, 5]``; unique solution 3.
``ex2``
    ``T(x) = (exp(-||x||**2) + 0.2) M x`` on ``[-5, 5]**3 ∩ {x1+x2+x3 = 0}``.
    ``T`` is not monotone but is strongly pseudomonotone; the origin solves
    the problem.
``ex3``
    L1-regularised logistic regression with 100 random samples in 3-D,
    ``eta = 2.5``. Features are uniform on ``[-1, 1]**3`` and labels uniform
    on ``{-1, +1}``, both drawn from ``numpy.random.default_rng(seed)``.
"""

import numpy as np

from .core import Affine, LogisticGradient, MviProblem, ScaledMatrixGaussian
from .errors import InvalidArgumentError
from .prox import IndicatorBoxHyperplane, QuadraticOnInterval, ScaledL1

EXAMPLES = ("ex1", "ex2", "ex3")

EX2_MATRIX = np.array([[1.0, 0.0, -1.0], [0.0, 1.5, 0.0], [-1.0, 0.0, 2.0]])
EX2_SHIFT = 0.2
EX2_BETA = 5.0679
EX2_MU = 0.0764
EX3_ETA = 2.5
EX3_SAMPLES = 100

# pairs known to break monotonicity-type conditions, checked before random samples
WITNESS_PROBES = {
    "ex1": [(np.array([3.0]), np.array([5.0]))],
    "ex2": [(np.array([-1.0, 0.0, 0.0]), np.array([-2.0, 0.0, 0.0]))],
}

# lambda is either fixed or a fraction of 1/(1 + beta**2)
DEFAULTS = {
    "ex1": {"lam": 0.25, "dt": 0.01, "t_end": 20.0},
    "ex2": {"lam_frac": 0.99, "dt": 0.005, "t_end": 600.0},
    "ex3": {"lam": 0.01, "dt": 0.01, "t_end": 400.0},
}


def logistic_data(seed, samples=EX3_SAMPLES, dim=3):
    rng = np.random.default_rng(seed)
    features = rng.uniform(-1.0, 1.0, size=(samples, dim))
    labels = rng.choice(np.array([-1.0, 1.0]), size=samples)
    return labels, features


def build_example(which, seed=0, eta=EX3_ETA):
    if which == "ex1":
        return MviProblem(
            dim=1,
            operator=Affine([[-1.0]], [4.0]),
            prox=QuadraticOnInterval(3.0, 5.0),
            known_solution=np.array([3.0]),
            lipschitz_beta=1.0,
            name="ex1",
        )
    if which == "ex2":
        return MviProblem(
            dim=3,
            operator=ScaledMatrixGaussian(EX2_MATRIX, EX2_SHIFT),
            prox=IndicatorBoxHyperplane(-5.0, 5.0, 0.0),
            known_solution=np.zeros(3),
            lipschitz_beta=EX2_BETA,
            strong_pseudo_mu=EX2_MU,
            name="ex2",
        )
    if which == "ex3":
        labels, features = logistic_data(seed)
        return MviProblem(
            dim=3,
            operator=LogisticGradient(labels, features),
            prox=ScaledL1(eta),
            name="ex3",
        )
    raise InvalidArgumentError(f"unknown example {which!r}; expected one of {EXAMPLES}")


def default_x0(which, seed=0):
    if which == "ex1":
        return np.array([0.1])
    if which == "ex2":
        return np.array([-4.0, 3.0, 5.0])
    if which == "ex3":
        # separate stream from the data so x0 does not shift the sample
        return np.random.default_rng([seed, 1]).uniform(-1.0, 1.0, size=3)
    raise InvalidArgumentError(f"unknown example {which!r}")
