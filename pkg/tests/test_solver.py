import math

import numpy as np
import pytest

from parampen.errors import InvalidInputError, SolverFailure
from parampen.penalty import ParameterSpace, ParametricPenalty, classical_penalty
from parampen.problemfile import parse_problem_file
from parampen.registry import load_problem
from parampen.singular import lianzhang_penalty, singular_penalty
from parampen.smoothing import exp_smoothing
from parampen.solver import (
    InnerResult,
    MinimizingSequence,
    SequenceRecord,
    SolverConfig,
    diagnose_sequence,
    minimize_F,
    pattern_search,
    penalty_continuation,
    smoothing_continuation,
)

FAST = SolverConfig(lambda_schedule=(1.0, 2.0, 8))


def brute_force_inf(pen, lam, xs, ps):
    """Direct (x, p) grid minimum of F_lambda, no reduction over p."""
    X, P = np.meshgrid(xs, ps, indexing="ij")
    F = pen.F(X[..., None], P, lam)
    i = np.unravel_index(np.argmin(F), F.shape)
    return float(F[i]), float(X[i]), float(P[i])


LZ_XS = np.linspace(0, 2, 2001)
LZ_PS = np.concatenate([[0.0], np.geomspace(1e-6, 3, 600)])


class TestConfig:
    def test_geometric_ladder(self):
        cfg = SolverConfig(lambda_schedule=(0.5, 3.0, 4))
        assert cfg.lambdas() == (0.5, 1.5, 4.5, 13.5)

    def test_explicit_ladder(self):
        assert SolverConfig(lambda_schedule=[1.0, 5.0]).lambdas() == (1.0, 5.0)
        # three floats are an explicit list, not a ladder
        assert SolverConfig(lambda_schedule=(1.0, 2.0, 3.0)).lambdas() == (1.0, 2.0, 3.0)

    def test_default_ladder(self):
        lams = SolverConfig().lambdas()
        assert len(lams) == 20 and lams[0] == 1.0 and lams[-1] == 2.0**19

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(lambda_schedule=[2.0, 1.0]),
            dict(lambda_schedule=[1.0, 1.0]),
            dict(lambda_schedule=(1.0, 1.0, 3)),
            dict(lambda_schedule=(1.0, 2.0, 0)),
            dict(lambda_schedule=[]),
            dict(multistart_count=0),
            dict(finite_difference_step=0.0),
            dict(tolerance=-1.0),
            dict(epsilon=-1e-3),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidInputError):
            SolverConfig(**kwargs)


class TestPatternSearch:
    def test_quadratic(self):
        def f(X):
            return np.sum((X - 0.3) ** 2, axis=-1)

        x, fx = pattern_search(f, np.array([2.0, -2.0]), np.full(2, -5.0), np.full(2, 5.0), 0.1, 1e-12)
        assert np.allclose(x, 0.3, atol=1e-6) and fx < 1e-12

    def test_respects_box(self):
        def f(X):
            return X[..., 0]

        x, _ = pattern_search(f, np.array([1.0]), np.array([0.5]), np.array([2.0]), 0.1, 1e-12)
        assert x[0] == 0.5


class TestMinimizeF:
    def test_unconstrained_quadratic_lambda_zero(self):
        prob = parse_problem_file("d = 1; box = [-1, 1]; f = x1^2; ineq = [x1 - 5]")
        res = minimize_F(singular_penalty(prob), 0.0)
        assert abs(res.x[0]) < 1e-6 and res.F_value < 1e-10

    def test_lianzhang_exact_regime(self, lz_singular):
        res = minimize_F(lz_singular, 1.0)
        ref, _, _ = brute_force_inf(lz_singular, 1.0, LZ_XS, LZ_PS)
        assert res.x[0] == pytest.approx(1, abs=1e-6)
        assert res.p < 1e-6
        assert res.F_value == pytest.approx(1, abs=1e-6)
        assert ref - 1e-9 <= res.F_value <= ref + FAST.tolerance

    def test_lianzhang_below_threshold(self, lz_singular):
        # f + 2 lambda |x - 1| with lambda = 0.25 is minimized at x = 0
        res = minimize_F(lz_singular, 0.25)
        ref, xr, _ = brute_force_inf(lz_singular, 0.25, LZ_XS, LZ_PS)
        # the p grid resolves the inner infimum to a few 1e-6
        assert xr == 0.0 and ref == pytest.approx(0.5, abs=1e-5)
        assert res.x[0] == pytest.approx(0, abs=1e-6)
        assert res.F_value == pytest.approx(0.5, abs=1e-6)

    @pytest.mark.parametrize("name", ["mfcq-nlp-2d", "qp-2d", "disk-2d", "circle-eq-2d"])
    def test_matches_oracle_2d(self, name):
        from parampen.oracle import oracle_inf_F

        pen = singular_penalty(load_problem(name))
        res = minimize_F(pen, 10.0)
        ref = oracle_inf_F(pen, 10.0)
        assert abs(res.F_value - ref.value) <= SolverConfig().tolerance

    def test_returns_triple(self, lz_singular):
        x, p, F = minimize_F(lz_singular, 1.0)
        assert F == pytest.approx(float(lz_singular.F(x, p, 1.0)), rel=1e-12)

    def test_deterministic_and_parallel_equal(self, lz_singular):
        a = minimize_F(lz_singular, 3.0, cfg=SolverConfig(seed=5))
        b = minimize_F(lz_singular, 3.0, cfg=SolverConfig(seed=5))
        c = minimize_F(lz_singular, 3.0, cfg=SolverConfig(seed=5, workers=3))
        assert np.array_equal(a.x, b.x) and a.p == b.p and a.F_value == b.F_value
        assert np.array_equal(a.x, c.x) and a.p == c.p and a.F_value == c.F_value

    def test_warm_start_used(self, lz_singular):
        res = minimize_F(lz_singular, 2.0, warm_start=([1.0], 0.0), cfg=SolverConfig(multistart_count=1, polish=False))
        assert res.start_index == 0 and res.x[0] == pytest.approx(1.0, abs=1e-6)

    def test_infinite_start_moves_p(self, lz_singular):
        # at p = 0 and x != 1 the singular term is infinite
        res = minimize_F(lz_singular, 2.0, warm_start=([0.3], 0.0), cfg=SolverConfig(multistart_count=1))
        assert np.isfinite(res.F_value) and res.starts_failed == 0

    def test_all_starts_fail(self):
        prob = parse_problem_file("d = 1; box = [0, 1]; f = x1; eq = [x1 - 1]")
        pen = ParametricPenalty(prob, lambda X, P: np.full(np.broadcast_shapes(X.shape[:-1], np.shape(P)), np.inf),
                                ParameterSpace.POINT)
        with pytest.raises(SolverFailure):
            minimize_F(pen, 1.0)

    def test_domain_errors_mark_points_infinite(self):
        # sqrt is undefined on half of the box; those points must not abort the solve
        prob = parse_problem_file("d = 1; box = [0, 2]; f = sqrt(x1 - 0.5); eq = [x1 - 1]")
        res = minimize_F(singular_penalty(prob), 10.0)
        assert res.x[0] == pytest.approx(1, abs=1e-6)
        assert res.F_value == pytest.approx(np.sqrt(0.5), abs=1e-6)

    def test_negative_lambda(self, lz_singular):
        with pytest.raises(InvalidInputError):
            minimize_F(lz_singular, -1.0)

    def test_classical_penalty(self, lianzhang):
        res = minimize_F(classical_penalty(lianzhang, "l1"), 2.0)
        assert res.p == 0.0 and res.x[0] == pytest.approx(1, abs=1e-6)


class TestContinuation:
    def test_exact_case(self, lz_singular):
        seq = penalty_continuation(lz_singular, FAST)
        assert len(seq) == 8 and seq.kind == "penalty" and seq.consistent()
        assert seq.records[-1].phi_value <= 1e-6
        assert seq.records[-1].f_value == pytest.approx(1, abs=1e-6)

    def test_oracle_sandwich_every_rung(self, lz_singular):
        seq = penalty_continuation(lz_singular, FAST)
        for r in seq.records:
            ref, _, _ = brute_force_inf(lz_singular, r.lam, LZ_XS, LZ_PS)
            # the brute-force grid only over-estimates the infimum
            assert r.F_value <= ref + FAST.epsilon + 1e-9

    def test_single_rung(self, lz_singular):
        seq = penalty_continuation(lz_singular, SolverConfig(lambda_schedule=[4.0]))
        assert len(seq) == 1
        res = minimize_F(lz_singular, 4.0, cfg=SolverConfig(lambda_schedule=[4.0]))
        assert seq.records[0].F_value == pytest.approx(res.F_value, abs=1e-12)

    def test_infeasible_problem_stalls(self):
        pen = singular_penalty(load_problem("infeasible-1d"))
        seq = penalty_continuation(pen, FAST)
        # d(0, G(x)) >= 1 so inf_p phi = 2 d >= 2
        assert np.all(seq.column("phi_value") >= 2 - 1e-6)

    def test_record_consistency(self):
        pen = singular_penalty(load_problem("mfcq-nlp-2d"))
        seq = penalty_continuation(pen, SolverConfig(lambda_schedule=(1.0, 2.0, 5)))
        for r in seq.records:
            assert r.F_value == pytest.approx(r.f_value + r.lam * r.phi_value, rel=1e-12)

    def test_smoothing_continuation(self, lianzhang):
        approx = exp_smoothing(lianzhang)
        seq = smoothing_continuation(approx, lianzhang, 2.0, [1.0, 0.1, 0.01, 1e-3, 1e-4])
        assert seq.kind == "smoothing" and seq.consistent()
        assert seq.column("p").tolist() == [1.0, 0.1, 0.01, 1e-3, 1e-4]
        last = seq.records[-1]
        assert last.x[0] == pytest.approx(1, abs=1e-3)
        assert last.g_value == pytest.approx(1, abs=1e-3)

    def test_smoothing_singleton(self, lianzhang):
        seq = smoothing_continuation(exp_smoothing(lianzhang), lianzhang, 2.0, [0.5])
        assert len(seq) == 1

    @pytest.mark.parametrize("ps", [[0.1, 0.5], [1.0, 0.0], []])
    def test_smoothing_bad_schedule(self, lianzhang, ps):
        with pytest.raises(InvalidInputError):
            smoothing_continuation(exp_smoothing(lianzhang), lianzhang, 1.0, ps)


def _seq(rows):
    recs = [SequenceRecord(lam, np.array([x]), p, f, phi, f + lam * phi) for lam, x, p, f, phi in rows]
    return MinimizingSequence(recs, "lianzhang-1d", "test")


class TestDiagnoseSequence:
    def test_exact_run_passes(self, lz_singular, lianzhang):
        seq = penalty_continuation(lz_singular, FAST)
        rep = diagnose_sequence(seq, lianzhang, omega_lower=lz_singular.omega_lower)
        assert rep.passed, rep.checks
        assert not rep.conditional_on_inner_globality

    def test_short_sequence_inconclusive(self, lianzhang):
        rep = diagnose_sequence(_seq([(1, 1.0, 0, 1, 0), (2, 1.0, 0, 1, 0)]), lianzhang)
        assert {c.status for c in rep.checks} == {"inconclusive"}
        assert not rep.passed

    def test_empty(self, lianzhang):
        with pytest.raises(InvalidInputError):
            diagnose_sequence(MinimizingSequence(), lianzhang)

    def test_phi_not_vanishing(self, lianzhang):
        rows = [(2.0**k, 0.5, 0.5, 0.5, 1.0) for k in range(6)]
        rep = diagnose_sequence(_seq(rows), lianzhang)
        assert rep.get("phi_to_zero").status == "fail"
        assert rep.get("cluster_feasible").status == "fail"
        assert rep.get("f_window").status == "fail"

    def test_p_check_needs_omega(self, lianzhang):
        rows = [(2.0**k, 1.0, 0.0, 1.0, 0.0) for k in range(6)]
        assert diagnose_sequence(_seq(rows), lianzhang).get("p_to_p0").status == "inconclusive"
        rep = diagnose_sequence(_seq(rows), lianzhang, omega_lower=lambda p: p)
        assert rep.get("p_to_p0").status == "pass"

    def test_window_uses_beta_limit(self, lianzhang):
        rows = [(2.0**k, 1.0, 0.0, 0.5, 0.0) for k in range(6)]
        rep = diagnose_sequence(_seq(rows), lianzhang, beta_limit=0.5)
        assert rep.get("f_window").status == "pass"
        assert rep.get("zero_gap_window").status == "fail"

    def test_lianzhang_term_clusters_at_minimizer(self, lianzhang):
        # the iterates approach x* = 1 although the term is not exact
        seq = penalty_continuation(lianzhang_penalty(lianzhang), FAST)
        last = seq.records[-1]
        assert abs(last.x[0] - 1) < 1e-2
        assert last.F_value < 1


def test_inner_result_iterates():
    r = InnerResult(np.array([1.0]), 0.5, 2.0)
    x, p, F = r
    assert p == 0.5 and F == 2.0 and not math.isnan(x[0])
