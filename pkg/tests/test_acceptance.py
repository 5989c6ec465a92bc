"""Acceptance gate: nine end-to-end criteria at their stated tolerances.

Each test records one ``PASS``/``FAIL`` line; ``conftest.py`` prints them in
an "acceptance criteria" section at the end of the pytest run.
"""

import math
import sys
import time

import numpy as np
import pytest

from fbf_mvi import analysis, problems
from fbf_mvi.discrete import IterSpec, iterate
from fbf_mvi.dynamics import FlowSpec, euler_equiv_check, integrate
from fbf_mvi.prox import (
    IndicatorBoxHyperplane,
    IndicatorInterval,
    QuadraticOnInterval,
    ScaledL1,
    Zero,
    h_value,
    prox,
    prox_oracle,
    sample_domain,
)

ORACLE_RES = 1e-6


@pytest.fixture
def report(record_property):
    def _report(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        record_property("acceptance", line)
        assert ok, line

    return _report


def _ex2_lam(frac):
    return frac / (1.0 + problems.EX2_BETA**2)


def test_criterion_1_ex1_reproduction(report):
    problem = problems.build_example("ex1")
    worst_err, slowest, failures = 0.0, 0.0, []
    for frac in (0.99, 0.8, 0.5):
        lam = frac / 2
        start = time.perf_counter()
        rec = integrate(problem, FlowSpec(lam=lam, x0=[0.1], t_end=20.0, dt=0.01))
        elapsed = time.perf_counter() - start
        err = abs(rec.xs[-1, 0] - 3.0)
        mon = analysis.verify_trajectory_inequalities(problem, rec, lam, 1.0)["lyapunov_nonincrease"]
        worst_err, slowest = max(worst_err, err), max(slowest, elapsed)
        if not (err <= 1e-4 and mon.passed and elapsed < 1.0):
            failures.append(f"lambda={lam}: err={err:.2e} lyapunov={mon.passed} time={elapsed:.3f}s")
    report(1, not failures, f"max |x-3|={worst_err:.2e}, slowest run {slowest:.3f}s {failures or ''}")


def test_criterion_2_ex2_constants(report):
    problem = problems.build_example("ex2")
    beta = analysis.estimate_lipschitz(problem.operator, ([-5.0] * 3, [5.0] * 3), samples=100_000, seed=0)
    lmin = analysis.lambda_min(problems.EX2_MATRIX)
    q_lmin = problems.EX2_SHIFT * lmin
    x, y = np.array([-1.0, 0.0, 0.0]), np.array([-2.0, 0.0, 0.0])
    witness = float(np.dot(problem.T(x) - problem.T(y), x - y))
    checks = {
        "lipschitz in [4.5, 5.12]": 4.5 <= beta <= 5.12,
        "lambda_min": abs(lmin - (3 - math.sqrt(5)) / 2) <= 1e-10,
        "q*lambda_min": abs(q_lmin - 0.0764) <= 5e-4,
        "witness": abs(witness - (-0.1312)) <= 1e-3,
    }
    failed = [k for k, v in checks.items() if not v]
    report(
        2,
        not failed,
        f"lipschitz estimate {beta:.4f}, lambda_min {lmin:.12f}, q*lambda_min {q_lmin:.6f}, "
        f"witness {witness:.6f}" + (f"; failed: {failed}" if failed else ""),
    )


def test_criterion_3_ex2_trajectory(report):
    problem = problems.build_example("ex2")
    lam = _ex2_lam(0.99)
    start = time.perf_counter()
    rec = integrate(problem, FlowSpec(lam=lam, x0=[-4.0, 3.0, 5.0], t_end=600.0, dt=0.005), stop_tol=1e-6)
    elapsed = time.perf_counter() - start
    sums = np.abs(rec.ys.sum(axis=1)).max()
    in_box = bool(np.all(rec.ys >= -5.0) and np.all(rec.ys <= 5.0))
    mon = analysis.verify_trajectory_inequalities(problem, rec, lam, problems.EX2_BETA)
    ok = sums <= 1e-9 and in_box and rec.final_residual <= 1e-6 and all(m.passed for m in mon.values())
    ok = ok and elapsed < 5.0
    names = ", ".join(f"{k}={'ok' if v.passed else 'FAIL'}" for k, v in mon.items())
    report(3, ok, f"max |sum y|={sums:.1e}, residual {rec.final_residual:.2e}, {names}, {elapsed:.2f}s")


def test_criterion_4_ges_bound(report):
    problem = problems.build_example("ex1")
    verdict = analysis.classify_monotonicity(problem, probes=problems.WITNESS_PROBES["ex1"])
    mu = verdict.mu_estimate
    cert = analysis.make_certificate(1.0, mu, 0.25)
    rec = integrate(problem, FlowSpec(lam=0.25, x0=[0.1], t_end=20.0, dt=0.01))
    d = analysis.verify_decay(rec, cert)
    ok = mu >= 3.0 and d.holds and d.fitted_rate >= cert.alpha
    report(4, ok, f"mu={mu:.4f}, alpha={cert.alpha:.5f}, fitted rate={d.fitted_rate:.4f}, min slack={d.margin:.2e}")


def test_criterion_5_euler_tseng_identity(report):
    cases = {
        "ex1": (0.25, problems.default_x0("ex1")),
        "ex2": (_ex2_lam(0.99), problems.default_x0("ex2")),
        "ex3": (0.01, problems.default_x0("ex3", 0)),
    }
    results = {k: euler_equiv_check(problems.build_example(k), lam, 100, x0) for k, (lam, x0) in cases.items()}
    report(5, all(results.values()), f"bitwise equal over 100 steps: {results}")


def _prox_cases():
    return {
        "QuadraticOnInterval": (QuadraticOnInterval(3.0, 5.0), 1),
        "IndicatorInterval": (IndicatorInterval(-1.0, 2.0), 3),
        "IndicatorBoxHyperplane": (IndicatorBoxHyperplane(-5.0, 5.0, 0.0), 3),
        "ScaledL1": (ScaledL1(2.5), 3),
        "Zero": (Zero(), 3),
    }


def test_criterion_6_prox_correctness(report):
    rng = np.random.default_rng(6)
    worst = {}
    failures = []
    for name, (spec, n) in _prox_cases().items():
        err = nonexp = ineq = 0.0
        for _ in range(1000):
            z = rng.uniform(-8, 8, n)
            z2 = rng.uniform(-8, 8, n)
            lam = 10 ** rng.uniform(-2, 0.5)
            p = prox(spec, z, lam)
            err = max(err, np.max(np.abs(p - prox_oracle(spec, z, lam, ORACLE_RES))))
            p2 = prox(spec, z2, lam)
            nonexp = max(nonexp, np.linalg.norm(p - p2) - np.linalg.norm(z - z2))
            vs = sample_domain(spec, rng, *(spec.bounds() or (-8, 8)), n, 5)
            hp = h_value(spec, p)
            for v in vs:
                gap = np.dot(z - p, v - p) - lam * (h_value(spec, v) - hp)
                ineq = max(ineq, gap)
        worst[name] = (err, nonexp, ineq)
        if err > 2 * ORACLE_RES or nonexp > 1e-9 or ineq > 1e-9:
            failures.append(name)
    detail = "; ".join(f"{k}: oracle {e:.1e}, nonexp {a:.1e}, ineq {b:.1e}" for k, (e, a, b) in worst.items())
    report(6, not failures, detail)


def test_criterion_7_composition_lipschitz(report):
    rng = np.random.default_rng(7)
    worst = {}
    for which, lam, beta in (("ex1", 0.25, 1.0), ("ex2", _ex2_lam(0.99), problems.EX2_BETA)):
        problem = problems.build_example(which)
        n = problem.dim
        excess = -np.inf
        for _ in range(1000):
            u, v = rng.uniform(-6, 6, n), rng.uniform(-6, 6, n)
            fu = prox(problem.prox, u - lam * problem.T(u), lam)
            fv = prox(problem.prox, v - lam * problem.T(v), lam)
            excess = max(excess, np.linalg.norm(fu - fv) - (1 + lam * beta) * np.linalg.norm(u - v))
        worst[which] = float(excess)
    report(7, all(e <= 1e-9 for e in worst.values()), f"max excess over (1+lam*beta)|u-v|: {worst}")


def test_criterion_8_logistic_l1(report):
    problem = problems.build_example("ex3", seed=0)
    rep = iterate(problem, IterSpec(lam=0.01, x0=problems.default_x0("ex3", 0), max_iters=1000, tol=1e-8))
    h = rep.history
    losses = h.losses
    rises = np.diff(losses[1:])
    monotone = bool(np.all(rises <= 1e-12))
    steps = np.linalg.norm(np.diff(h.xs, axis=0), axis=1)
    stable = np.flatnonzero(steps <= 1e-6)
    first = int(stable[0]) if stable.size else None
    big = problems.build_example("ex3", seed=0, eta=50.0)
    rep50 = iterate(big, IterSpec(lam=0.01, x0=problems.default_x0("ex3", 0), max_iters=1000, tol=1e-8))
    zeros = bool(np.all(rep50.history.ys[-1] == 0.0)) and np.max(np.abs(rep50.final_x)) <= 1e-8
    ok = monotone and first is not None and first <= 500 and 10 <= first <= 200 and zeros
    report(
        8,
        ok,
        f"loss nonincreasing={monotone}, stabilised at iteration {first}, "
        f"eta=50 gives exact zeros={zeros}, x*={np.round(rep.final_x, 4).tolist()}",
    )


def test_criterion_9_classifier_ex1(report):
    problem = problems.build_example("ex1")
    verdict = analysis.classify_monotonicity(problem, probes=problems.WITNESS_PROBES["ex1"])
    w = verdict.witnesses.get("pseudomonotone")
    u, v = np.array([3.0]), np.array([5.0])
    tu = float(np.dot(problem.T(u), v - u))
    tv = float(np.dot(problem.T(v), v - u))
    ok = (
        verdict.class_flags["h_pseudomonotone"]
        and not verdict.class_flags["pseudomonotone"]
        and w is not None
        and list(w.u) == [3.0]
        and list(w.v) == [5.0]
        and tu == 2.0
        and tv == -2.0
    )
    report(9, ok, f"flags={verdict.class_flags}, witness=({w.u}, {w.v}), <Tu,v-u>={tu}, <Tv,v-u>={tv}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
