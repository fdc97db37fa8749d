"""Acceptance criteria, one test each.

Every test prints a ``PASS``/``FAIL`` line for its criterion; the lines are
also collected into the terminal summary by ``conftest.py``.
"""

import io

import numpy as np
import pytest

import rsd_cases
from parampen import cli
from parampen.configs import uniform_shift
from parampen.descent import feasibility_preservation_scan
from parampen.diagnostics import (
    Calmness,
    Verdict,
    calmness_test,
    exactness_detector,
    geometric_etas,
    local_exactness_probe,
    perturbation_function,
    reduction_equivalence_test,
    verify_sandwich_bounds,
    zero_duality_gap_test,
)
from parampen.oracle import minimize_over_p, oracle_inf_F
from parampen.penalty import l1_term
from parampen.problem import residual_distance
from parampen.problemfile import format_problem, parse_problem_file
from parampen.registry import list_problems, load, load_problem
from parampen.reports import csv_body
from parampen.singular import (
    SingularConfig,
    eval_singular_term,
    identity_growth,
    lianzhang_penalty,
    linear_growth,
    local_exactness_bound,
    saturating_growth,
    singular_penalty,
)
from parampen.smoothing import exp_smoothing, exp_theta, logsumexp_term
from parampen.solver import SolverConfig, penalty_continuation


def report(record_property, number, title, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'} [{number:>2}] {title}"
    if detail:
        line += f" :: {detail}"
    print(line)
    record_property("acceptance", line)
    assert ok, line


def linear_cfg(w=None):
    return SingularConfig(identity_growth(), identity_growth(), w=w)


def test_exp_theta_bounds(record_property):
    t = np.arange(-10.0, 10.0 + 5e-4, 1e-3)
    worst, at_zero = 0.0, 0.0
    for p in (1.0, 0.1, 0.01):
        th = exp_theta(t, p)
        plus = np.maximum(0.0, t)
        worst = max(worst, float(np.max(plus - th)), float(np.max(th - plus - p / 2)))
        at_zero = max(at_zero, abs(exp_theta(0.0, p) - p / 2))
    ok = worst <= 1e-12 and at_zero <= 1e-15
    report(record_property, 1, "0 <= theta(t,p) - max(0,t) <= p/2, attained at t = 0", ok,
           f"max violation {worst:.2e}, |theta(0,p) - p/2| {at_zero:.2e}")


def test_logsumexp_bounds(record_property):
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(200):
        k = int(rng.integers(1, 5))  # k constraints plus the 0 summand
        rows = ", ".join(f"{rng.normal()!r} * x1 - ({rng.normal()!r})" for _ in range(k))
        prob = parse_problem_file(f"d = 1; box = [-3, 3]; f = x1; ineq = [{rows}]")
        x = rng.uniform(-3, 3, size=(1, 1))
        phi = float(np.max(np.concatenate([[0.0], prob.constraint_values(x)[0]])))
        for p in (1.0, 0.1):
            v = float(logsumexp_term(prob, x, p)[0])
            worst = max(worst, phi - v, v - phi - p * np.log(k + 1))
    big = parse_problem_file("d = 1; box = [-10000, 10000]; f = x1; ineq = [x1, 0.5 * x1, -x1]")
    X = np.linspace(-1e4, 1e4, 41)[:, None]
    v = logsumexp_term(big, X, np.full(41, 1e-3))
    exact = np.abs(X[:, 0])
    stable = bool(np.all(np.isfinite(v))) and float(np.max(np.abs(v - exact) - 1e-3 * np.log(4))) <= 1e-9
    ok = worst <= 1e-9 and stable
    report(record_property, 2, "log-sum-exp sandwich within p ln(m+1), stable at residual 1e4", ok,
           f"max violation {worst:.2e}, stable {stable}")


def test_exp_smoothing_inf_over_p(record_property):
    rng = np.random.default_rng(12)
    names = [n for n in list_problems() if load_problem(n).constraints.size > 0]
    worst, count = 0.0, 0
    while count < 100:
        prob = load_problem(names[count % len(names)])
        lo, hi = prob.box.finite_bounds()
        x = rng.uniform(lo, hi, size=(1, prob.dim))
        if float(residual_distance(prob, x)[0]) == 0:
            continue
        approx = exp_smoothing(prob)
        val, _ = minimize_over_p(lambda X, P: approx.family(X, P) + P, x, include_zero=False)
        worst = max(worst, abs(float(val[0]) - float(l1_term(prob, x)[0])))
        count += 1
    report(record_property, 3, "inf_p [Phi_exp(x,p) + p] = l1 term at infeasible points", worst <= 1e-6,
           f"max error {worst:.2e} over {count} points")


def test_sandwich_bounds(record_property):
    failed, checked = [], 0
    for name in ("lianzhang-1d", "mfcq-nlp-2d"):
        prob = load_problem(name)
        sample = cli.sample_pairs(prob, 1000, seed=5)
        for growth in ("linear", "saturating"):
            for length in (0.0, 1.0):
                phi = identity_growth() if growth == "linear" else saturating_growth(1.0)
                cfg = SingularConfig(phi, identity_growth(), w=uniform_shift(prob.constraints.size, length))
                rep = verify_sandwich_bounds(cfg, prob, sample)
                checked += rep.lower_checked + rep.upper_checked
                if not rep.passed or rep.lower_checked == 0 or rep.upper_checked == 0:
                    failed.append((name, growth, length))
    report(record_property, 4, "sandwich c0 d <= phi, inf_p phi <= C0 d on 1000 samples per config",
           not failed, f"{checked} bound checks, failing configs {failed}")


def test_linear_zero_shift_identity(record_property):
    rng = np.random.default_rng(13)
    prob = load_problem("mfcq-nlp-2d")
    worst = 0.0
    for _ in range(100):
        a, b = rng.uniform(0.2, 5.0, size=2)
        cfg = SingularConfig(linear_growth(a), linear_growth(b))
        x = rng.uniform(-3, 3, size=(1, 2))
        d = float(residual_distance(prob, x)[0])
        val, _ = minimize_over_p(lambda X, P: eval_singular_term(cfg, prob, X, P), x, p_max=100.0)
        worst = max(worst, abs(float(val[0]) - 2 * np.sqrt(a * b) * d))
    report(record_property, 5, "inf_p phi = 2 sqrt(phi0 omega0) d for linear growth, w = 0", worst <= 1e-8,
           f"max error {worst:.2e}")


@pytest.mark.parametrize("lam", [1.0, 10.0, 1e2, 1e3, 1e4, 1e5, 1e6])
def test_lianzhang_term_not_exact(record_property, lam):
    prob = load_problem("lianzhang-1d")
    pen = lianzhang_penalty(prob)
    v = exactness_detector(pen, prob, lam)
    F = None
    if v.witness is not None:
        F = float(pen.F(v.witness.x, v.witness.p, lam))
    ok = v.verdict is Verdict.NOT_EXACT_WITNESS and F is not None and F < 1 - 1e-6
    inf = v.inf_value if v.inf_value is not None else float("nan")
    report(record_property, 6, f"Lian-Zhang term has a witness F < 1 - 1e-6 at lambda = {lam:g}", ok,
           f"verdict {v.verdict.name}, grid inf {inf:.10f}")


def test_singular_exact_threshold(record_property):
    prob = load_problem("lianzhang-1d")
    cfg = linear_cfg()
    pen = singular_penalty(prob, cfg)
    v = exactness_detector(pen, prob, 10.0)
    lo, hi = v.lambda_star_estimate or (np.nan, np.nan)
    bound = local_exactness_bound(1.0, 1.0, cfg)
    probe = local_exactness_probe(pen, [1.0], [0.4], [1e-3, 1e-2, 1e-1])
    ok = (v.verdict is Verdict.EXACT_EVIDENCE and 0.49 <= lo and hi <= 0.51
          and bound == pytest.approx(0.5) and bool(probe.violated.all()))
    report(record_property, 7, "singular term exact with lambda* ~ 0.5 = lambda_bar, violated at 0.4", ok,
           f"lambda* in [{lo:.4f}, {hi:.4f}], bound {bound:g}, probe violated {probe.violated.tolist()}")


def test_duality_and_calmness(record_property):
    lams = [0.1, 1.0, 10.0, 100.0, 1e3, 1e4]
    etas = geometric_etas(1.0, 1e-3)
    lz = load_problem("lianzhang-1d")
    pen = singular_penalty(lz, linear_cfg())
    lz_rep = zero_duality_gap_test(pen, lz, lams, perturbation_function(pen, lz, etas, grid_step=1e-4))
    nc = load_problem("noncalm-sqrt")
    npen = singular_penalty(nc, linear_cfg())
    curve = perturbation_function(npen, nc, etas, grid_step=1e-4)
    calm = calmness_test(curve)
    verdict = exactness_detector(npen, nc, 1e4)
    nc_rep = zero_duality_gap_test(npen, nc, lams, curve)
    ok = (lz_rep.passed and lz_rep.gap <= 1e-2 and calm.status is Calmness.NOT_CALM
          and verdict.verdict is Verdict.NOT_EXACT_WITNESS and nc_rep.passed and nc_rep.gap <= 1e-2)
    report(record_property, 8, "zero duality gap on lianzhang; noncalm-sqrt not calm, not exact, zero gap", ok,
           f"gaps {lz_rep.gap:.2e} / {nc_rep.gap:.2e}, calmness {calm.status.name}, "
           f"detector {verdict.verdict.name}")


def test_penalty_continuation(record_property):
    eps = 1e-6
    notes, ok = [], True
    for name in ("lianzhang-1d", "mfcq-nlp-2d"):
        entry = load(name)
        pen = singular_penalty(entry.problem, linear_cfg())
        seq = penalty_continuation(pen, SolverConfig(epsilon=eps))
        last = seq.records[-1]
        good = (last.inner_status == "ok" and last.phi_value <= 1e-4 and last.p <= 1e-3
                and entry.fstar - 1e-3 <= last.f_value <= entry.fstar + eps + 1e-3)
        rung_gap = 0.0
        if entry.problem.dim == 1:
            for rec in seq.records:
                inf = oracle_inf_F(pen, rec.lam).value
                rung_gap = max(rung_gap, rec.F_value - inf)
                good = good and inf - 1e-6 <= rec.F_value <= inf + eps + 1e-9
        ok = ok and good
        notes.append(f"{name}: phi {last.phi_value:.1e}, p {last.p:.1e}, f {last.f_value:.8f}, "
                     f"max F - oracle {rung_gap:.1e}")
    report(record_property, 9, "penalty continuation reaches f* with phi, p -> 0", ok, "; ".join(notes))


def test_rsd_calculus(record_property):
    failures = {}
    runs = [("gradient", rsd_cases.check_gradient_case, 20),
            ("distance", rsd_cases.check_distance_case, 20),
            ("calm-power", rsd_cases.check_calm_power_case, 20)]
    runs += [(name, check, 50) for name, check in rsd_cases.CHECKS.items()]
    for name, check, count in runs:
        bad = rsd_cases.run_many(check, count, seed=7)
        if bad:
            failures[name] = len(bad)
    report(record_property, 10, "sampled descent rates obey gradient, distance and calculus rules",
           not failures, f"failing instances {failures}")


def test_feasibility_preservation(record_property):
    entry = load("mfcq-nlp-2d")
    pen = singular_penalty(entry.problem, linear_cfg())
    lam = 10 * local_exactness_bound(entry.L, entry.tau, linear_cfg())
    axis = np.linspace(-3, 3, 50)
    P = np.geomspace(1e-4, 3, 20)
    grid = np.array([[a, b, p] for a in axis for b in axis for p in P])
    found = feasibility_preservation_scan(pen, lam, grid)
    low = singular_penalty(load_problem("infeasible-localmin-1d"), linear_cfg())
    small = [(x, p) for x in np.linspace(-1.5, -0.5, 21) for p in (0.1, 1.0)]
    infeasible = feasibility_preservation_scan(low, 0.0, small)
    ok = not found and bool(infeasible)
    report(record_property, 11, "no infeasible inf-stationary points at 10 lambda_bar; some at lambda = 0", ok,
           f"lambda {lam:.3f}: {len(found)} flagged; lambda 0: {len(infeasible)} flagged")


def test_reduction_equivalence(record_property):
    cfg = linear_cfg()
    lz = reduction_equivalence_test(cfg, load_problem("lianzhang-1d"), 0.5, 1e4)
    nl = reduction_equivalence_test(cfg, load_problem("nonlipschitz-1d"), 0.5, 1e4)
    ok = (lz.agree and lz.parametric_exact and lz.standard_exact
          and nl.agree and not nl.parametric_exact and not nl.standard_exact)
    report(record_property, 12, "parametric and reduced penalties agree on exactness", ok,
           f"lianzhang {lz.parametric_exact}/{lz.standard_exact}, "
           f"nonlipschitz {nl.parametric_exact}/{nl.standard_exact}")


def _run_cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.main(list(argv), stdout=out, stderr=err)
    return code, out.getvalue()


def test_cli_determinism_and_fixpoint(record_property):
    args = ("solve", "--problem", "mfcq-nlp-2d", "--lambda-ladder", "1:2:6", "--seed", "4")
    c1, a = _run_cli(*args)
    c2, b = _run_cli(*args)
    same = c1 == c2 == cli.EXIT_OK and csv_body(a) == csv_body(b) and bool(csv_body(a))
    broken = []
    for name in list_problems():
        text = load(name).export()
        once = format_problem(parse_problem_file(text))
        if once != text or format_problem(parse_problem_file(once)) != once:
            broken.append(name)
    report(record_property, 13, "CLI CSV bodies are byte-identical; problem files round-trip", same and not broken,
           f"identical {same}, non-fixpoint exports {broken}")
