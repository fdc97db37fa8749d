"""Command-line interface: ``parampen <subcommand> [options]``.

Subcommands: solve, diagnose, sweep, verify-bounds, rsd, list-problems.

Exit codes: 0 success, 1 a requested expectation failed (``--expect-exact``
without EXACT_EVIDENCE, or failed sandwich checks), 2 usage, parse or
expression-evaluation error, 3 inner-solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

import numpy as np

from . import diagnostics as diag
from .configs import parse_floats, parse_ladder, parse_penalty, parse_singular_config
from .descent import RsdConfig, _joint, estimate_rsd, feasibility_preservation_scan
from .errors import (
    ConfigurationError,
    ExpressionDomainError,
    ExpressionSyntaxError,
    InvalidInputError,
    LookupFailure,
    SolverFailure,
)
from .problem import Problem
from .problemfile import parse_problem_file
from .registry import list_problems, load
from .reports import RunReport, sequence_table
from .singular import SingularConfig
from .solver import SolverConfig, diagnose_sequence, penalty_continuation, smoothing_continuation

EXIT_OK, EXIT_EXPECTATION, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2, 3

CHECKS = ("exactness", "duality", "calmness", "feasibility", "local", "reduction", "nondegeneracy", "sequence")

# keys accepted in a --config-file JSON document (same meaning as the flags)
CONFIG_KEYS = ("problem", "problem_file", "penalty", "lambda_ladder", "seed", "workers", "grid_step",
               "multistart", "iterations", "epsilon", "p_schedule", "lambda_cap", "out")


class UsageError(Exception):
    pass


def _common(p: argparse.ArgumentParser, penalty: bool = True) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--problem", help="registry problem name")
    src.add_argument("--problem-file", help="path to a problem file")
    if penalty:
        p.add_argument("--penalty", help="penalty string, e.g. singular:linear,w=0 (default singular:linear)")
    p.add_argument("--lambda-ladder", help="geometric ladder start:ratio:count (default 1:2:20)")
    p.add_argument("--seed", type=int, help="random seed (default 0)")
    p.add_argument("--workers", type=int, help="concurrent multistart workers (default 1)")
    p.add_argument("--grid-step", type=float, help="oracle grid step (default 1e-3 in 1-D, 1e-2 in 2-D)")
    p.add_argument("--multistart", type=int, help="random starts per inner solve (default 4)")
    p.add_argument("--iterations", type=int, help="inner iterations per start (default 200)")
    p.add_argument("--out", help="directory for CSV tables and summary.json (default: print to stdout)")
    p.add_argument("--json", action="store_true", help="print the JSON summary instead of CSV")
    p.add_argument("--config-file", help="JSON run configuration; explicit flags take precedence")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parampen", description="Parametric exact penalty toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="penalty (or smoothing) continuation")
    _common(p)
    p.add_argument("--epsilon", type=float, help="suboptimality target used by the sequence checks (default 1e-6)")
    p.add_argument("--p-schedule", help="decreasing comma-separated p values: smoothing continuation at "
                                        "fixed lambda (the first ladder value); needs a smooth: penalty")

    p = sub.add_parser("diagnose", help="brute-force diagnostics")
    _common(p)
    p.add_argument("--check", choices=CHECKS, required=True)
    p.add_argument("--lambda-cap", type=float, help="largest lambda examined (default 1e4)")
    p.add_argument("--expect-exact", action="store_true", help="exit 1 unless the verdict is EXACT_EVIDENCE")
    p.add_argument("--etas", help="decreasing eta grid (default 1 down to 1e-3, 4 per decade)")
    p.add_argument("--radii", help="radii for --check local (default 1e-1,1e-2,1e-3)")
    p.add_argument("--delta", type=float, default=0.5, help="Omega_delta level for --check reduction")
    p.add_argument("--epsilon", type=float)

    p = sub.add_parser("sweep", help="oracle infimum of F_lambda along the ladder")
    _common(p)

    p = sub.add_parser("verify-bounds", help="random checks of the singular sandwich bounds")
    _common(p, penalty=False)
    p.add_argument("--config", default="phi0=1,omega0=1,w=0",
                   help="singular config, e.g. phi0=1,omega0=1,w=0 or growth=saturating,w=1")
    p.add_argument("--samples", type=int, default=1000)

    p = sub.add_parser("rsd", help="rate of steepest descent of F_lambda at a point")
    _common(p)
    p.add_argument("--point", required=True, help="comma-separated coordinates of x")
    p.add_argument("--param", type=float, default=0.0, help="penalty parameter p (default 0)")
    p.add_argument("--lam", type=float, default=1.0, help="penalty weight lambda (default 1)")
    p.add_argument("--samples", type=int, default=10000, help="samples per shell")

    p = sub.add_parser("list-problems", help="list registry problems")
    p.add_argument("--json", action="store_true")
    return parser


def _apply_config_file(args) -> None:
    if not getattr(args, "config_file", None):
        return
    try:
        with open(args.config_file, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError("config file must hold a JSON object")
    unknown = set(doc) - set(CONFIG_KEYS)
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    for key, value in doc.items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, value)


def _problem(args) -> Problem:
    if args.problem_file:
        try:
            with open(args.problem_file, encoding="utf-8") as fh:
                return parse_problem_file(fh.read())
        except OSError as exc:
            raise UsageError(f"cannot read problem file: {exc}") from None
    return load(args.problem or "lianzhang-1d").problem


def _solver_config(args, **extra) -> SolverConfig:
    ladder = parse_ladder(args.lambda_ladder) if args.lambda_ladder else (1.0, 2.0, 20)
    kw = dict(lambda_schedule=ladder, seed=args.seed or 0, workers=args.workers or 1)
    if args.multistart:
        kw["multistart_count"] = args.multistart
    if args.iterations is not None:
        kw["inner_iterations"] = args.iterations
    kw.update(extra)
    return SolverConfig(**kw)


def _metadata(args, problem, options=None) -> dict:
    meta = {"command": args.command, "problem": problem.name, "seed": args.seed or 0}
    if options:
        meta.update(options)
    for key in ("lambda_ladder", "grid_step", "lambda_cap", "check", "p_schedule"):
        v = getattr(args, key, None)
        if v is not None:
            meta[key] = v
    return meta


def _emit(report: RunReport, args, stdout) -> None:
    if args.out:
        for path in report.write(args.out):
            print(path, file=stdout)
    elif getattr(args, "json", False):
        stdout.write(report.json_text())
    else:
        for name in report.tables:
            stdout.write(report.csv_text(name))


# ------------------------------------------------------------ subcommands


def cmd_solve(args, stdout) -> int:
    problem = _problem(args)
    pen, options = parse_penalty(args.penalty or "singular:linear", problem)
    extra = {}
    if "p0" in options:
        extra["p_start_range"] = (min(1e-6, options["p0"]), options["p0"])
    cfg = _solver_config(args, **extra)
    eps = 1e-6 if args.epsilon is None else args.epsilon
    if args.p_schedule:
        if not pen.name.startswith("smooth:"):
            raise UsageError("--p-schedule needs a smooth: penalty")
        seq = smoothing_continuation(pen.config, problem, cfg.lambdas()[0], parse_floats(args.p_schedule), cfg)
        omega = None
    else:
        seq = penalty_continuation(pen, cfg)
        omega = pen.omega_lower
    report = RunReport(_metadata(args, problem, options))
    report.add_table("sequence", *sequence_table(seq, problem.dim))
    checks = diagnose_sequence(seq, problem, eps=eps, omega_lower=omega)
    report.verdicts["sequence"] = {c.name: {"status": c.status, **c.measured} for c in checks.checks}
    report.verdicts["conditional_on_inner_globality"] = checks.conditional_on_inner_globality
    _emit(report, args, stdout)
    return EXIT_SOLVER if any(r.inner_status != "ok" for r in seq.records) else EXIT_OK


def _etas(args):
    if getattr(args, "etas", None):
        return parse_floats(args.etas)
    return diag.geometric_etas(1.0, 1e-3)


def cmd_diagnose(args, stdout) -> int:
    problem = _problem(args)
    pen, options = parse_penalty(args.penalty or "singular:linear", problem)
    cap = 1e4 if args.lambda_cap is None else args.lambda_cap
    report = RunReport(_metadata(args, problem, options))
    step = args.grid_step
    code = EXIT_OK
    check = args.check
    if check == "exactness":
        v = diag.exactness_detector(pen, problem, cap, grid_step=step)
        report.verdicts["exactness"] = v
        if args.expect_exact and v.verdict is not diag.Verdict.EXACT_EVIDENCE:
            code = EXIT_EXPECTATION
    elif check in ("duality", "calmness"):
        grid = diag._ReducedGrid(pen, problem, step)
        curve = diag.perturbation_function(pen, problem, _etas(args), _grid=grid)
        report.add_table("perturbation", ["eta", "beta", "gamma"], curve.rows())
        report.verdicts["beta0"] = curve.beta0
        report.verdicts["monotonicity_violations"] = curve.monotonicity_violations
        if check == "duality":
            ladder = _solver_config(args).lambdas()
            rep = diag.zero_duality_gap_test(pen, problem, ladder, curve, _grid=grid)
            report.add_table("duality", ["lambda", "inf_F"], list(zip(rep.lambdas, rep.h_values)))
            report.verdicts["duality"] = rep
        else:
            report.verdicts["calmness"] = diag.calmness_test(curve)
    elif check == "feasibility":
        lo, hi = problem.box.finite_bounds()
        axes = [np.linspace(l, h, 50 if problem.dim <= 2 else 12) for l, h in zip(lo, hi)]
        if pen.parametric:
            axes.append(np.logspace(-4, 0, 20))
        mesh = np.meshgrid(*axes, indexing="ij")
        grid = np.stack([m.ravel() for m in mesh], axis=-1)
        lam = _solver_config(args).lambdas()[-1] if args.lambda_ladder else cap
        found = feasibility_preservation_scan(pen, lam, grid)
        cols = [f"x{i + 1}" for i in range(problem.dim)] + ["p", "rsd"]
        report.add_table("feasibility", cols, [[*r.point.tolist(), r.param, r.rsd_value] for r in found])
        report.verdicts["feasibility"] = {"lambda": lam, "grid_points": int(grid.shape[0]),
                                          "infeasible_stationary": len(found)}
    elif check == "local":
        if not problem.known_minimizers:
            raise UsageError("--check local needs a problem with a known minimizer")
        radii = parse_floats(args.radii) if args.radii else [1e-1, 1e-2, 1e-3]
        res = diag.local_exactness_probe(pen, problem.known_minimizers[0], _solver_config(args).lambdas(), radii)
        rows = [[lam, r, bool(res.violated[i, j])] for i, lam in enumerate(res.lambdas) for j, r in enumerate(res.radii)]
        report.add_table("local", ["lambda", "radius", "violated"], rows)
        report.verdicts["local"] = {"evidence_lambdas": res.evidence_lambdas}
        if args.expect_exact and not res.locally_exact_evidence:
            code = EXIT_EXPECTATION
    elif check == "reduction":
        cfg = pen.config
        if not isinstance(cfg, SingularConfig):
            raise UsageError("--check reduction needs a singular: penalty")
        rep = diag.reduction_equivalence_test(cfg, problem, args.delta, cap, grid_step=step)
        report.verdicts["reduction"] = {
            "agree": rep.agree, "parametric_exact": rep.parametric_exact, "standard_exact": rep.standard_exact,
            "parametric_threshold": rep.parametric_threshold, "standard_threshold": rep.standard_threshold,
        }
    elif check == "nondegeneracy":
        cfg = _solver_config(args)
        rep = diag.nondegeneracy_probe(pen, problem, cfg.lambdas(), cfg)
        report.add_table("nondegeneracy", ["lambda", "x_norm", "p"], list(zip(rep.lambdas, rep.x_norms, rep.p_values)))
        report.verdicts["nondegeneracy"] = {"unbounded_trend": rep.unbounded_trend, "max_norm": rep.max_norm}
    elif check == "sequence":
        cfg = _solver_config(args)
        seq = penalty_continuation(pen, cfg)
        report.add_table("sequence", *sequence_table(seq, problem.dim))
        eps = 1e-6 if args.epsilon is None else args.epsilon
        checks = diagnose_sequence(seq, problem, eps=eps, omega_lower=pen.omega_lower)
        report.verdicts["sequence"] = {c.name: {"status": c.status, **c.measured} for c in checks.checks}
        if any(r.inner_status != "ok" for r in seq.records):
            code = EXIT_SOLVER
    _emit(report, args, stdout)
    return code


def cmd_sweep(args, stdout) -> int:
    problem = _problem(args)
    pen, options = parse_penalty(args.penalty or "singular:linear", problem)
    grid = diag._ReducedGrid(pen, problem, args.grid_step)
    rows = []
    for lam in _solver_config(args).lambdas():
        value, x, p = grid.inf_F(lam)
        rows.append([lam, value, *x.tolist(), p])
    report = RunReport(_metadata(args, problem, options))
    report.add_table("sweep", ["lambda", "inf_F", *[f"x{i + 1}" for i in range(problem.dim)], "p"], rows)
    _emit(report, args, stdout)
    return EXIT_OK


def sample_pairs(problem: Problem, n: int, seed: int):
    """Seeded (x, p) sample: x uniform in the (finite surrogate) box, p log-uniform in [1e-6, 3]."""
    rng = np.random.default_rng(seed)
    lo, hi = problem.box.finite_bounds()
    X = rng.uniform(lo, hi, size=(n, problem.dim))
    P = 10.0 ** rng.uniform(-6.0, np.log10(3.0), size=n)
    return X, P


def cmd_verify_bounds(args, stdout) -> int:
    problem = _problem(args)
    cfg = parse_singular_config(args.config, problem)
    X, P = sample_pairs(problem, args.samples, args.seed or 0)
    rep = diag.verify_sandwich_bounds(cfg, problem, (X, P))
    report = RunReport(_metadata(args, problem, {"config": cfg.describe(), "samples": args.samples}))
    rows = [["lower", *np.atleast_1d(x).tolist(), p, v, b] for x, p, v, b in rep.lower_failures]
    rows += [["upper", *np.atleast_1d(x).tolist(), float("nan"), v, b] for x, v, b in rep.upper_failures]
    report.add_table("bound_failures", ["bound", *[f"x{i + 1}" for i in range(problem.dim)], "p", "value", "bound_value"], rows)
    report.verdicts["sandwich"] = {
        "c0": rep.c0, "delta0": rep.delta0, "C0": rep.C0, "delta_upper": rep.delta_upper,
        "lower_checked": rep.lower_checked, "upper_checked": rep.upper_checked,
        "lower_failures": len(rep.lower_failures), "upper_failures": len(rep.upper_failures),
    }
    _emit(report, args, stdout)
    return EXIT_OK if rep.passed else EXIT_EXPECTATION


def cmd_rsd(args, stdout) -> int:
    problem = _problem(args)
    pen, options = parse_penalty(args.penalty or "singular:linear", problem)
    x = parse_floats(args.point)
    if x.size != problem.dim:
        raise UsageError(f"--point has {x.size} coordinates, problem dimension is {problem.dim}")
    g, member, _, metric = _joint(pen, args.lam)
    z = np.append(x, args.param) if pen.parametric else x
    cfg = RsdConfig(samples_per_shell=args.samples, seed=args.seed or 0, metric=metric)
    est = estimate_rsd(g, member, z, cfg)
    report = RunReport(_metadata(args, problem, {**options, "lam": args.lam, "param": args.param}))
    report.add_table("rsd", ["radius", "min_quotient", "admissible"],
                     list(zip(est.radii, est.per_radius_min, est.admissible_counts or [None] * len(est.radii))))
    report.verdicts["rsd"] = {"value": est.value, "no_admissible_samples": est.no_admissible_samples}
    _emit(report, args, stdout)
    return EXIT_OK


def cmd_list(args, stdout) -> int:
    names = list_problems()
    if args.json:
        doc = []
        for n in names:
            e = load(n)
            doc.append({"name": n, "dim": e.problem.dim, "fstar": e.fstar, "note": e.note})
        stdout.write(json.dumps(doc, indent=2) + "\n")
    else:
        for n in names:
            e = load(n)
            fstar = "-" if e.fstar is None else repr(e.fstar)
            stdout.write(f"{n}\td={e.problem.dim}\tfstar={fstar}\t{e.note}\n")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "diagnose": cmd_diagnose,
    "sweep": cmd_sweep,
    "verify-bounds": cmd_verify_bounds,
    "rsd": cmd_rsd,
    "list-problems": cmd_list,
}


def main(argv: Optional[list] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        _apply_config_file(args)
        return COMMANDS[args.command](args, stdout)
    except ExpressionSyntaxError as exc:
        print(f"parse error: {exc}", file=stderr)
        return EXIT_USAGE
    except ExpressionDomainError as exc:
        print(f"evaluation error: {exc}", file=stderr)
        return EXIT_USAGE
    except (UsageError, ConfigurationError, InvalidInputError, LookupFailure) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_USAGE
    except SolverFailure as exc:
        print(f"solver failure: {exc}", file=stderr)
        return EXIT_SOLVER


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
