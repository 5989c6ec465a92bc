"""Command-line front end.

Subcommands ``solve`` (integrate the flow), ``iterate`` (discrete solver)
and ``analyze`` (operator classification and stability certificate). Each
run writes its CSV/JSON artifacts into one output directory.

Exit codes: 0 converged, 1 usage or parse error, 2 horizon reached,
3 divergence.
"""

import argparse
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import analysis, problems
from .config import load_config
from .core import Affine, MviProblem, ScaledMatrixGaussian
from .discrete import IterSpec, iterate
from .dynamics import FlowSpec, integrate, lipschitz_for_validation
from .errors import ConfigError, DivergenceError, InvalidArgumentError, InvalidLambdaError
from .prox import IndicatorBoxHyperplane, IndicatorInterval, QuadraticOnInterval, ScaledL1, Zero
from .report import MonitorVerdict, RunReport, write_json, write_trajectory_csv

EXIT_OK, EXIT_USAGE, EXIT_HORIZON, EXIT_DIVERGENCE = 0, 1, 2, 3
EXIT_FOR_REASON = {"tolerance": EXIT_OK, "horizon": EXIT_HORIZON, "divergence": EXIT_DIVERGENCE}
DEFAULT_OUTPUT = "fbf_output"

# CLI destination -> (section, key); the step section depends on the command
_PROBLEM_FLAGS = {"example": "example", "seed": "seed", "eta": "eta"}
_STEP_FLAGS = {
    "solve": ("flow", {"lam": "lambda", "lambda_frac": "lambda_frac", "dt": "dt", "t_end": "t_end",
                       "tol": "tol", "scheme": "scheme", "method": "system", "x0": "x0",
                       "stride": "record_stride", "allow_invalid_lambda": "allow_invalid_lambda"}),
    "iterate": ("iter", {"lam": "lambda", "lambda_frac": "lambda_frac", "tol": "tol", "x0": "x0",
                         "method": "method", "relaxation": "relaxation", "max_iters": "max_iters"}),
    "analyze": ("analysis", {"lam": "lambda", "lambda_frac": "lambda_frac", "samples": "samples",
                             "lipschitz_samples": "lipschitz_samples"}),
}


def _parse_vector(text):
    return np.array([float(v) for v in text.split(",")])


def build_parser():
    parser = argparse.ArgumentParser(prog="fbf-mvi", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", action="append", default=[], metavar="PATH",
                        help="INI config; repeat to run a batch")
    common.add_argument("--example", choices=problems.EXAMPLES)
    common.add_argument("--seed", type=int)
    common.add_argument("--eta", type=float, help="L1 weight for ex3")
    common.add_argument("--lambda", dest="lam", type=float)
    common.add_argument("--lambda-frac", type=float, help="set lambda = f / (1 + beta^2)")
    common.add_argument("--output", help="output directory (default: $FBF_OUTPUT_DIR or ./fbf_output)")
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--no-timing", action="store_true", help="write wall_time_ms as 0 for reproducible files")

    p = sub.add_parser("solve", parents=[common], help="integrate the continuous flow")
    p.add_argument("--dt", type=float)
    p.add_argument("--t-end", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--scheme", choices=("euler", "rk4"))
    p.add_argument("--method", choices=("fbf", "proxgrad"))
    p.add_argument("--x0", type=_parse_vector)
    p.add_argument("--stride", type=int)
    p.add_argument("--allow-invalid-lambda", action="store_true", default=None)

    p = sub.add_parser("iterate", parents=[common], help="run the discrete solver")
    p.add_argument("--tol", type=float)
    p.add_argument("--method", choices=("tseng", "proxgrad"))
    p.add_argument("--relaxation", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--x0", type=_parse_vector)

    p = sub.add_parser("analyze", parents=[common], help="classify the operator and certify stability")
    p.add_argument("--samples", type=int)
    p.add_argument("--lipschitz-samples", type=int)
    return parser


def merge_settings(command, args, config):
    settings = {k: dict(v) for k, v in config.items()}
    prob = settings.setdefault("problem", {})
    for dest, key in _PROBLEM_FLAGS.items():
        if getattr(args, dest, None) is not None:
            prob[key] = getattr(args, dest)
    section, flags = _STEP_FLAGS[command]
    step = settings.setdefault(section, {})
    for dest, key in flags.items():
        if getattr(args, dest, None) is not None:
            step[key] = getattr(args, dest)
    if "stride" in step:
        step.setdefault("record_stride", step.pop("stride"))
    return settings


def build_problem(p):
    if "example" in p:
        eta = p.get("eta", problems.EX3_ETA)
        return problems.build_example(p["example"], p.get("seed", 0), eta=eta)
    if "operator" not in p:
        raise InvalidArgumentError("no problem given: use --example or a [problem] section")
    kind = p["operator"]
    if kind == "zero":
        n = p.get("dim")
        if n is None:
            raise InvalidArgumentError("operator = zero needs dim")
        op = Affine(np.zeros((n, n)), np.zeros(n))
    elif kind == "affine":
        A = p["matrix"]
        op = Affine(A, p.get("offset", np.zeros(A.shape[0])))
    elif kind == "gaussian":
        op = ScaledMatrixGaussian(p["matrix"], p.get("shift", problems.EX2_SHIFT))
    else:
        raise InvalidArgumentError(f"unknown operator {kind!r}")
    n = op.dim
    kind = p.get("prox", "zero")
    if kind == "zero":
        h = Zero()
    elif kind == "l1":
        h = ScaledL1(p["eta"])
    elif kind == "interval":
        h = IndicatorInterval(p["lo"], p["hi"])
    elif kind == "quadratic_interval":
        h = QuadraticOnInterval(p["lo"], p["hi"])
    elif kind == "box_hyperplane":
        h = IndicatorBoxHyperplane(p["lo"], p["hi"], p.get("target_sum", 0.0))
    else:
        raise InvalidArgumentError(f"unknown prox {kind!r}")
    return MviProblem(
        dim=n,
        operator=op,
        prox=h,
        known_solution=p.get("known_solution"),
        lipschitz_beta=p.get("beta"),
        strong_pseudo_mu=p.get("mu"),
        name=p.get("name", "custom"),
    )


def resolve_lambda(problem, step, example):
    if "lambda" in step:
        return step["lambda"]
    frac = step.get("lambda_frac")
    if frac is None:
        defaults = problems.DEFAULTS.get(example, {})
        if "lam" in defaults:
            return defaults["lam"]
        frac = defaults.get("lam_frac")
    if frac is None:
        raise InvalidArgumentError("no step size: pass --lambda or --lambda-frac")
    beta = lipschitz_for_validation(problem)
    return frac / (1.0 + beta**2)


def _x0(problem, step, example, seed):
    if "x0" in step:
        return step["x0"]
    if example is not None:
        return problems.default_x0(example, seed)
    return np.zeros(problem.dim)


def _output_dir(settings, args):
    if args.output:
        return Path(args.output)
    if "dir" in settings.get("output", {}):
        return Path(settings["output"]["dir"])
    return Path(os.environ.get("FBF_OUTPUT_DIR", DEFAULT_OUTPUT))


def _monitors_for_flow(problem, record, lam):
    beta = lipschitz_for_validation(problem)
    monitors = analysis.verify_trajectory_inequalities(problem, record, lam, beta)
    cert = None
    mu = problem.strong_pseudo_mu
    if mu is None and record.lyapunov is not None:
        # sampled estimate; the probes pin down the infimum for the built-in examples
        probes = problems.WITNESS_PROBES.get(problem.name)
        mu = analysis.classify_monotonicity(problem, probes=probes).mu_estimate
    if mu is not None:
        cert = analysis.make_certificate(beta, mu, lam)
        if cert.lambda_valid and record.lyapunov is not None:
            d = analysis.verify_decay(record, cert)
            if d.holds:
                detail = ""
            elif d.step is not None:
                detail = f"violated at record {d.step}"
            else:
                detail = f"fitted rate {d.fitted_rate:.3g} below alpha {d.alpha:.3g}"
            monitors["ges_decay"] = MonitorVerdict(d.holds, d.margin, detail)
    return monitors, cert


def run_solve(settings, out, timing=True):
    p = settings.get("problem", {})
    step = settings.get("flow", {})
    example = p.get("example")
    problem = build_problem(p)
    lam = resolve_lambda(problem, step, example)
    defaults = problems.DEFAULTS.get(example, {})
    flow = FlowSpec(
        lam=lam,
        x0=_x0(problem, step, example, p.get("seed", 0)),
        t_end=step.get("t_end", defaults.get("t_end", 20.0)),
        dt=step.get("dt", defaults.get("dt", 0.01)),
        system=step.get("system", "fbf"),
        delta=step.get("delta", 1.0),
        record_stride=step.get("record_stride", 1),
        allow_invalid_lambda=step.get("allow_invalid_lambda", False),
    )
    tol = step.get("tol", 1e-8)
    scheme = step.get("scheme", "euler")
    start = time.perf_counter()
    try:
        record = integrate(problem, flow, stop_tol=tol, scheme=scheme)
    except DivergenceError as exc:
        record = exc.record
        print(f"divergence: {exc}", file=sys.stderr)
    elapsed = (time.perf_counter() - start) * 1e3

    monitors, cert = {}, None
    if flow.system == "fbf" and record.stop_reason != "divergence" and len(record):
        monitors, cert = _monitors_for_flow(problem, record, lam)
    report = RunReport(
        problem_id=problem.name,
        method=f"{flow.system}-{scheme}",
        lam=lam,
        dt=flow.dt,
        t_end=flow.t_end,
        tol=tol,
        final_residual=record.final_residual if len(record) else float("nan"),
        iterations_or_steps=record.steps,
        stop_reason=record.stop_reason,
        monitor_verdicts=monitors,
        certificate=cert,
        wall_time_ms=elapsed if timing else 0.0,
        final_x=record.xs[-1].tolist() if len(record) else None,
    )
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(out / "trajectory.csv", record.times, record.xs, record.ys, record.residuals,
                         lyapunov=record.lyapunov)
    write_json(out / "report.json", report.to_dict())
    print(f"{problem.name}: {report.stop_reason} after {report.iterations_or_steps} steps, "
          f"residual {report.final_residual:.3e}, x = {report.final_x}")
    return EXIT_FOR_REASON[report.stop_reason]


def run_iterate(settings, out, timing=True):
    p = settings.get("problem", {})
    step = settings.get("iter", {})
    example = p.get("example")
    problem = build_problem(p)
    lam = resolve_lambda(problem, step, example)
    spec = IterSpec(
        lam=lam,
        x0=_x0(problem, step, example, p.get("seed", 0)),
        method=step.get("method", "tseng"),
        relaxation=step.get("relaxation", 1.0),
        max_iters=step.get("max_iters", 1000),
        tol=step.get("tol", 1e-8),
    )
    try:
        report = iterate(problem, spec)
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        out.mkdir(parents=True, exist_ok=True)
        report = RunReport(problem.name, spec.method, lam, None, None, spec.tol, float("nan"),
                           exc.step, "divergence")
        write_json(out / "report.json", report.to_dict())
        return EXIT_DIVERGENCE
    if not timing:
        report.wall_time_ms = 0.0
    h = report.history
    # iteration n sits at time n * relaxation on the flow's clock
    rel = spec.relaxation if spec.method == "tseng" else 1.0
    times = np.arange(len(h.xs)) * rel
    lyap = None
    if problem.known_solution is not None:
        d = h.xs - problem.known_solution
        lyap = np.einsum("ij,ij->i", d, d)
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(out / "iterates.csv", times, h.xs, h.ys, h.residuals, lyapunov=lyap, loss=h.losses)
    write_json(out / "report.json", report.to_dict())
    print(f"{problem.name}: {report.stop_reason} after {report.iterations_or_steps} iterations, "
          f"residual {report.final_residual:.3e}, x = {report.final_x}")
    return EXIT_FOR_REASON[report.stop_reason]


def run_analyze(settings, out, timing=True):
    p = settings.get("problem", {})
    step = settings.get("analysis", {})
    example = p.get("example")
    problem = build_problem(p)
    lo, hi = analysis.default_box(problem)
    seed = p.get("seed", 0)
    beta_est = analysis.estimate_lipschitz(problem.operator, (lo, hi), step.get("lipschitz_samples", 100_000), seed)
    verdict = analysis.classify_monotonicity(
        problem, (lo, hi), step.get("samples", 10_000), seed, probes=problems.WITNESS_PROBES.get(example)
    )
    beta = problem.lipschitz_beta if problem.lipschitz_beta is not None else 1.05 * beta_est
    mu = problem.strong_pseudo_mu if problem.strong_pseudo_mu is not None else verdict.mu_estimate
    cert = None
    lam = None
    if beta > 0:
        lam = resolve_lambda(problem, step, example)
        if mu is not None:
            cert = analysis.make_certificate(beta, mu, lam)
    payload = {
        "problem_id": problem.name,
        "lipschitz_estimate": beta_est,
        "lipschitz_used": beta,
        "lambda": lam,
        "verdict": {
            "class_flags": verdict.class_flags,
            "witnesses": {k: vars(w) for k, w in verdict.witnesses.items()},
            "mu_estimate": verdict.mu_estimate,
            "samples_used": verdict.samples_used,
        },
        "certificate": None if cert is None else vars(cert),
    }
    if isinstance(problem.operator, ScaledMatrixGaussian):
        lmin = analysis.lambda_min(problem.operator.matrix)
        payload["lambda_min"] = lmin
        payload["shift_times_lambda_min"] = problem.operator.shift * lmin
        payload["lipschitz_upper_bound"] = analysis.gaussian_lipschitz_bound(problem.operator)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "analysis.json", payload)
    print(f"{problem.name}: Lipschitz estimate {beta_est:.6g}")
    for cls in analysis.CLASSES:
        print(f"  {cls}: {verdict.class_flags[cls]}")
        w = verdict.witnesses.get(cls)
        if w is not None:
            print(f"    witness u={w.u} v={w.v} value={w.value:.6g}")
    if verdict.mu_estimate is not None:
        print(f"  mu estimate: {verdict.mu_estimate:.6g}")
    if cert is not None:
        print(f"  certificate: alpha={cert.alpha:.6g} (lambda valid: {cert.lambda_valid})")
    return EXIT_OK


RUNNERS = {"solve": run_solve, "iterate": run_iterate, "analyze": run_analyze}


def _run_one(command, args, config_path, out):
    try:
        config = load_config(config_path) if config_path else {}
        settings = merge_settings(command, args, config)
        out = out if out is not None else _output_dir(settings, args)
        return RUNNERS[command](settings, out, timing=not args.no_timing)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except InvalidLambdaError as exc:
        print(f"error: {exc}; pass --allow-invalid-lambda to run anyway", file=sys.stderr)
    except (InvalidArgumentError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_USAGE


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.jobs < 1:
        parser.error("--jobs must be >= 1")
    configs = args.config or [None]
    if len(configs) == 1:
        out = Path(args.output) if args.output else None
        return _run_one(args.command, args, configs[0], out)

    # batch: one subdirectory per config
    root = Path(args.output) if args.output else Path(os.environ.get("FBF_OUTPUT_DIR", DEFAULT_OUTPUT))
    jobs = [(args.command, args, c, root / Path(c).stem) for c in configs]
    if args.jobs == 1:
        codes = [_run_one(*j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            codes = list(pool.map(_run_one, *zip(*jobs)))
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
