"""Forward-backward-forward dynamics for mixed variational inequalities."""

from .analysis import (
    MonotonicityVerdict,
    StabilityCertificate,
    classify_monotonicity,
    estimate_lipschitz,
    make_certificate,
    verify_decay,
    verify_trajectory_inequalities,
)
from .core import (
    Affine,
    LogisticGradient,
    MviProblem,
    ScaledMatrixGaussian,
    SolutionResidual,
    eval_operator,
    fbf_residual,
)
from .discrete import IterSpec, iterate, loss_l1_logistic
from .dynamics import FlowSpec, TrajectoryRecord, euler_equiv_check, integrate, rhs_fbf, rhs_proxgrad
from .problems import build_example, default_x0
from .prox import (
    IndicatorBoxHyperplane,
    IndicatorInterval,
    QuadraticOnInterval,
    ScaledL1,
    Zero,
    prox,
    prox_oracle,
)
from .report import RunReport

__version__ = "0.1.0"
