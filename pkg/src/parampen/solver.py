"""Inner minimization of F_lambda over A x P, penalty continuation along an
increasing lambda ladder, smoothing continuation along a decreasing p
schedule, and diagnostics for the resulting minimizing sequences.

The inner solver works on z = (x, p) with p as the last coordinate (bounded
below by 0).  Each start runs projected gradient descent with central
finite differences and Armijo backtracking.  The best start is then polished
by a pattern search on the reduced function x -> f(x) + lambda inf_p phi(x, p),
which copes with the kinks that exact penalties have at feasible points; the
parameter is finally set to its minimizer for the polished x.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ExpressionDomainError, InvalidInputError, SolverFailure
from .penalty import ParameterSpace, ParametricPenalty
from .problem import Problem, residual_distance


@dataclass(frozen=True)
class SolverConfig:
    """Inner-solver budget and continuation schedule.

    ``lambda_schedule`` may be an explicit increasing sequence or a triple
    ``(lambda0, ratio, count)`` describing a geometric ladder.  ``epsilon`` is
    the suboptimality target of each rung; ``None`` means
    ``1e-6 * (1 + |f(x0)|)`` for the first start point ``x0``.
    """

    multistart_count: int = 4
    inner_iterations: int = 200
    finite_difference_step: float = 1e-6
    tolerance: float = 1e-6
    seed: int = 0
    lambda_schedule: Sequence[float] = (1.0, 2.0, 20)
    epsilon: Optional[float] = 1e-6
    workers: int = 1
    polish: bool = True
    p_start_range: tuple = (1e-6, 1.0)

    def __post_init__(self):
        if self.multistart_count < 1:
            raise InvalidInputError("multistart_count must be >= 1")
        if self.inner_iterations < 0 or self.finite_difference_step <= 0 or self.tolerance <= 0:
            raise InvalidInputError("invalid solver budget")
        if self.epsilon is not None and self.epsilon < 0:
            raise InvalidInputError("epsilon must be nonnegative")
        self.lambdas()  # validates

    @staticmethod
    def geometric(start: float, ratio: float, count: int) -> tuple:
        if start <= 0 or ratio <= 1 or count < 1 or int(count) != count:
            raise InvalidInputError("geometric ladder needs start > 0, ratio > 1, count >= 1")
        return tuple(float(start) * float(ratio) ** k for k in range(int(count)))

    def lambdas(self) -> tuple:
        s = tuple(self.lambda_schedule)
        # (start, ratio, count) with an integer count is a geometric ladder
        if len(s) == 3 and isinstance(s[2], (int, np.integer)) and not isinstance(s[2], bool):
            ladder = self.geometric(*s)
        else:
            ladder = tuple(float(v) for v in s)
        if not ladder or any(v <= 0 for v in ladder) or any(b <= a for a, b in zip(ladder, ladder[1:])):
            raise InvalidInputError("lambda schedule must be positive and strictly increasing")
        return ladder


@dataclass
class InnerResult:
    x: np.ndarray
    p: float
    F_value: float
    status: str = "ok"
    start_index: int = 0
    starts_failed: int = 0

    def __iter__(self):
        return iter((self.x, self.p, self.F_value))


# ------------------------------------------------------------ helpers


def _tolerant(func):
    """Batch evaluation where a domain error at one point only marks that point as +inf."""

    def g(Z):
        try:
            return func(Z)
        except ExpressionDomainError:
            flat = Z.reshape(-1, Z.shape[-1])
            out = np.empty(flat.shape[0])
            for i, z in enumerate(flat):
                try:
                    out[i] = func(z[None, :])[0]
                except ExpressionDomainError:
                    out[i] = np.inf
            return out.reshape(Z.shape[:-1])

    return g


class _Objective:
    """F_lambda on z = (x, p): x in the box, p >= 0."""

    def __init__(self, pen: ParametricPenalty, lam: float):
        self.pen = pen
        self.lam = lam
        self.d = pen.problem.dim
        lo, hi = pen.problem.box.lower, pen.problem.box.upper
        if pen.parametric:
            self.lo = np.append(lo, 0.0)
            self.hi = np.append(hi, np.inf)
        else:
            self.lo, self.hi = lo, hi

    @property
    def k(self):
        return self.lo.size

    def _eval(self, Z):
        if self.pen.parametric:
            return self.pen.F(Z[..., : self.d], Z[..., self.d], self.lam)
        return self.pen.F(Z, 0.0, self.lam)

    def __call__(self, Z):
        return _tolerant(self._eval)(np.asarray(Z, dtype=float))

    def project(self, Z):
        return np.clip(Z, self.lo, self.hi)


def _fd_gradient(obj: _Objective, z: np.ndarray, fz: float, rel_step: float) -> np.ndarray:
    """Central differences with step rel_step * max(1, |z_i|), one-sided at bounds."""
    k = z.size
    h = rel_step * np.maximum(1.0, np.abs(z))
    E = np.eye(k) * h
    plus = z + E
    minus = z - E
    can_plus = plus[np.arange(k), np.arange(k)] <= obj.hi
    can_minus = minus[np.arange(k), np.arange(k)] >= obj.lo
    vals = obj(np.vstack([np.where(can_plus[:, None], plus, z), np.where(can_minus[:, None], minus, z)]))
    with np.errstate(invalid="ignore"):
        return _combine(vals, fz, h, k, can_plus, can_minus)


def _combine(vals, fz, h, k, can_plus, can_minus):
    fp, fm = vals[:k], vals[k:]
    g = np.where(can_plus & can_minus, (fp - fm) / (2 * h),
                 np.where(can_plus, (fp - fz) / h, np.where(can_minus, (fz - fm) / h, 0.0)))
    # an infinite neighbour (e.g. p stepping into the p = 0 branch): use the finite side
    bad = ~np.isfinite(g)
    if np.any(bad):
        fwd = np.where(np.isfinite(fp), (fp - fz) / h, np.nan)
        bwd = np.where(np.isfinite(fm), (fz - fm) / h, np.nan)
        alt = np.where(np.isfinite(fwd), fwd, np.where(np.isfinite(bwd), bwd, 0.0))
        g = np.where(bad, alt, g)
    return g


_LINE_STEPS = 2.0 ** -np.arange(0, 48)


def projected_gradient(obj: _Objective, z0: np.ndarray, iterations: int, rel_step: float, tol: float):
    """Projected gradient descent with a batched Armijo backtracking search."""
    z = obj.project(np.asarray(z0, dtype=float))
    fz = float(obj(z[None, :])[0])
    t = 1.0
    for _ in range(iterations):
        if not np.isfinite(fz):
            break
        g = _fd_gradient(obj, z, fz, rel_step)
        if not np.all(np.isfinite(g)) or not np.any(g):
            break
        ts = min(1e8, 4.0 * t) * _LINE_STEPS
        cand = obj.project(z[None, :] - ts[:, None] * g[None, :])
        vals = obj(cand)
        decrease = (z[None, :] - cand) @ g
        ok = np.isfinite(vals) & (vals <= fz - 1e-4 * decrease) & (decrease > 0)
        if not np.any(ok):
            break
        j = int(np.argmax(ok))
        step = np.max(np.abs(cand[j] - z))
        z, fz_new, t = cand[j], float(vals[j]), ts[j]
        small = fz - fz_new <= 1e-15 * (1.0 + abs(fz)) and step <= tol * 1e-6 * (1.0 + np.max(np.abs(z)))
        fz = fz_new
        if small:
            break
    return z, fz


def _directions(k: int) -> np.ndarray:
    """Coordinate, diagonal and a fixed set of spread-out directions."""
    dirs = [np.eye(k), -np.eye(k)]
    if k >= 2:
        for i in range(k):
            for j in range(i + 1, k):
                for si in (1, -1):
                    for sj in (1, -1):
                        v = np.zeros(k)
                        v[i], v[j] = si, sj
                        dirs.append(v[None, :] / math.sqrt(2))
    if k == 2:
        ang = np.pi * (np.arange(16) + 0.5) / 8
        dirs.append(np.stack([np.cos(ang), np.sin(ang)], axis=-1))
    elif k > 2:
        rng = np.random.default_rng(12345)
        r = rng.standard_normal((8 * k, k))
        dirs.append(r / np.linalg.norm(r, axis=1, keepdims=True))
    return np.vstack(dirs)


def _ridge_directions(history: list, k: int) -> np.ndarray:
    """Directions along recent progress and small tilts of them.

    Along a curved kink of a nonsmooth function no fixed direction set keeps
    making progress; the displacement over the last few accepted moves is
    nearly tangent to the kink and is tried together with tilted copies.
    """
    out = []
    x = history[-1]
    for back in (2, 4, 8):
        if len(history) > back:
            u = x - history[-1 - back]
            n = np.linalg.norm(u)
            if n == 0:
                continue
            u = u / n
            out.extend([u, -u])
            for eps in (0.01, 0.03, 0.1, 0.3):
                for e in np.eye(k):
                    for sign in (1, -1):
                        v = u + sign * eps * e
                        out.append(v / np.linalg.norm(v))
    return np.array(out).reshape(-1, k)


def pattern_search(func, x0: np.ndarray, lo: np.ndarray, hi: np.ndarray, step0: float,
                   min_step: float, max_iter: int = 5000):
    """Box-constrained pattern search with step expansion after successful moves."""
    x = np.clip(np.asarray(x0, dtype=float), lo, hi)
    fx = float(func(x[None, :])[0])
    base = _directions(x.size)
    history = [x]
    step = step0
    max_step = step0 * 2.0 ** 10
    for _ in range(max_iter):
        if step < min_step:
            break
        dirs = np.vstack([base, _ridge_directions(history, x.size)])
        cand = np.clip(x + step * dirs, lo, hi)
        vals = np.asarray(func(cand), dtype=float)
        vals = np.where(np.isnan(vals), np.inf, vals)
        j = int(np.argmin(vals))
        if vals[j] < fx:
            x, fx = cand[j], float(vals[j])
            history = history[-8:] + [x]
            step = min(2.0 * step, max_step)
        else:
            step /= 4.0
    return x, fx


def _start_points(pen: ParametricPenalty, cfg: SolverConfig, warm_start, rng) -> list:
    problem = pen.problem
    lo, hi = problem.box.finite_bounds(10.0)
    starts = []
    if warm_start is not None:
        x, p = warm_start
        starts.append((np.atleast_1d(np.asarray(x, dtype=float)), float(p)))
    plo, phi = cfg.p_start_range
    n_random = cfg.multistart_count
    xs = rng.uniform(lo, hi, size=(n_random, problem.dim))
    ps = np.exp(np.linspace(np.log(phi * pen.p_scale), np.log(plo), n_random)) if n_random > 1 else [phi]
    for x, p in zip(xs, ps):
        starts.append((x, float(p)))
    return starts


def _run_start(obj: _Objective, pen: ParametricPenalty, x0, p0, cfg: SolverConfig):
    problem = pen.problem
    x0 = problem.box.project(x0)
    if pen.parametric:
        z0 = np.append(x0, p0)
        if not np.isfinite(obj(z0[None, :])[0]):
            # an infinite start (p = 0 at an infeasible point, or a barrier) moves p off 0
            _, pbest = pen.inf_phi(x0[None, :])
            for cand in (float(pbest[0]), max(p0, 1e-3), 1.0, 10.0):
                z0 = np.append(x0, cand)
                if np.isfinite(obj(z0[None, :])[0]):
                    break
    else:
        z0 = x0
    f0 = obj(z0[None, :])[0]
    if not np.isfinite(f0):
        return None
    z, fz = projected_gradient(obj, z0, cfg.inner_iterations, cfg.finite_difference_step, cfg.tolerance)
    return z, fz


def _polish_offsets(d: int) -> np.ndarray:
    r = np.random.default_rng(2024).standard_normal((2, d))
    return r / np.linalg.norm(r, axis=1, keepdims=True)


def _polish(obj: _Objective, pen: ParametricPenalty, z: np.ndarray, fz: float, cfg: SolverConfig):
    problem = pen.problem
    d = problem.dim
    lam = obj.lam
    lo, hi = problem.box.lower, problem.box.upper
    scale = max(1.0, float(np.max(np.abs(z[:d]))))
    if pen.parametric:

        def reduced(X):
            f = problem.f(X)
            if lam == 0:
                return f
            v, _ = pen.inf_phi(X)
            return np.where(np.isinf(v), np.inf, f + lam * v)

    else:

        def reduced(X):
            return obj(X)

    # a start exactly on a curved kink may admit no descent along any fixed
    # direction; restarts from slightly displaced points build up a history
    # of moves along the kink
    starts = [z[:d]] + [z[:d] + 1e-3 * scale * u for u in _polish_offsets(d)]
    best = None
    for x0 in starts:
        x, fx = pattern_search(_tolerant(reduced), x0, lo, hi, 1e-2 * scale, 1e-13 * scale)
        if best is None or fx < best[1]:
            best = (x, fx)
    x = best[0]
    if pen.parametric:
        _, p = pen.inf_phi(x[None, :])
        cand = np.append(x, p[0])
    else:
        cand = x
    fc = float(obj(cand[None, :])[0])
    if fc <= fz:
        return cand, fc
    return z, fz


def minimize_F(pen: ParametricPenalty, lam: float, warm_start=None, cfg: Optional[SolverConfig] = None) -> InnerResult:
    """Best point found for F_lambda over A x P (multistart projected descent + polish).

    Parameters
    ----------
    warm_start : (x, p), optional
        Extra start point tried first.

    Raises
    ------
    SolverFailure
        If no start yields a finite value.
    """
    cfg = cfg or SolverConfig()
    if lam < 0:
        raise InvalidInputError("lambda must be nonnegative")
    obj = _Objective(pen, lam)
    rng = np.random.default_rng(cfg.seed)
    starts = _start_points(pen, cfg, warm_start, rng)

    def run(i):
        x0, p0 = starts[i]
        return _run_start(obj, pen, x0, p0, cfg)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
            results = list(ex.map(run, range(len(starts))))
    else:
        results = [run(i) for i in range(len(starts))]
    failed = sum(r is None for r in results)
    best_i, best = None, None
    for i, r in enumerate(results):  # lowest index wins ties
        if r is not None and np.isfinite(r[1]) and (best is None or r[1] < best[1]):
            best_i, best = i, r
    if best is None:
        raise SolverFailure(f"all {len(starts)} starts failed for lambda={lam:g}")
    z, fz = best
    if cfg.polish:
        z, fz = _polish(obj, pen, z, fz, cfg)
    d = pen.problem.dim
    x = z[:d].copy()
    p = float(z[d]) if pen.parametric else 0.0
    return InnerResult(x, p, float(fz), "ok", best_i, failed)


# ------------------------------------------------------------ sequences


@dataclass
class SequenceRecord:
    lam: float
    x: np.ndarray
    p: float
    f_value: float
    phi_value: float
    F_value: float
    inner_status: str = "ok"
    g_value: Optional[float] = None

    @property
    def lambda_(self) -> float:
        return self.lam


@dataclass
class MinimizingSequence:
    """Continuation trace; ``kind`` is ``"penalty"`` (lambda increasing) or
    ``"smoothing"`` (lambda fixed, p decreasing)."""

    records: list = field(default_factory=list)
    problem_name: str = ""
    penalty: str = ""
    kind: str = "penalty"

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def consistent(self, rtol: float = 1e-12) -> bool:
        for r in self.records:
            if r.inner_status != "ok":
                continue
            if not math.isclose(r.F_value, r.f_value + r.lam * r.phi_value, rel_tol=rtol, abs_tol=1e-300):
                return False
        if self.kind == "penalty":
            lams = [r.lam for r in self.records]
            return all(b > a for a, b in zip(lams, lams[1:]))
        return True


def _record(pen: ParametricPenalty, lam: float, x, p) -> SequenceRecord:
    f = float(pen.problem.f(x))
    phi = float(pen.phi(x, p))
    F = f if lam == 0 else (math.inf if math.isinf(phi) else f + lam * phi)
    return SequenceRecord(lam, np.asarray(x, dtype=float), float(p), f, phi, F)


def _failed_record(lam: float, d: int) -> SequenceRecord:
    nan = float("nan")
    return SequenceRecord(lam, np.full(d, nan), nan, nan, nan, nan, "failed")


def penalty_continuation(pen: ParametricPenalty, cfg: Optional[SolverConfig] = None) -> MinimizingSequence:
    """Warm-started loop over the lambda ladder; one record per rung."""
    cfg = cfg or SolverConfig()
    seq = MinimizingSequence(problem_name=pen.problem.name, penalty=pen.name, kind="penalty")
    warm = None
    for n, lam in enumerate(cfg.lambdas()):
        rung_cfg = replace(cfg, seed=cfg.seed + n)
        try:
            res = minimize_F(pen, lam, warm, rung_cfg)
        except SolverFailure:
            seq.records.append(_failed_record(lam, pen.problem.dim))
            continue
        seq.records.append(_record(pen, lam, res.x, res.p))
        warm = (res.x, res.p)
    return seq


def smoothing_continuation(approx, problem: Problem, lam: float, p_schedule: Sequence[float],
                           cfg: Optional[SolverConfig] = None) -> MinimizingSequence:
    """For each p_n minimize x -> f(x) + lam Phi(x, p_n), warm-started.

    Records carry ``phi_value = Phi(x_n, p_n)`` and ``g_value = f(x_n) + lam phi(x_n)``
    for the nonsmooth base term phi.
    """
    cfg = cfg or SolverConfig()
    if lam <= 0:
        raise InvalidInputError("lambda must be positive")
    ps = [float(v) for v in p_schedule]
    if not ps or any(v <= 0 for v in ps) or any(b >= a for a, b in zip(ps, ps[1:])):
        raise InvalidInputError("p schedule must be positive and strictly decreasing")
    seq = MinimizingSequence(problem_name=problem.name, penalty=f"smooth:{approx.name}", kind="smoothing")
    warm = None
    for n, p in enumerate(ps):
        fixed = ParametricPenalty(problem, lambda X, P, p=p: approx.family(X, np.full(np.shape(X)[:-1], p)),
                                  ParameterSpace.POINT, name=f"smooth:{approx.name},p={p:g}")
        try:
            res = minimize_F(fixed, lam, warm, replace(cfg, seed=cfg.seed + n))
        except SolverFailure:
            seq.records.append(_failed_record(lam, problem.dim))
            continue
        rec = _record(fixed, lam, res.x, 0.0)
        rec.p = p
        rec.g_value = float(problem.f(res.x) + lam * approx.base_term(res.x))
        seq.records.append(rec)
        warm = (res.x, 0.0)
    return seq


# ------------------------------------------------------------ diagnostics


@dataclass
class CheckResult:
    name: str
    status: str  # "pass" | "fail" | "inconclusive"
    measured: dict = field(default_factory=dict)


@dataclass
class SequenceDiagnostics:
    checks: list
    conditional_on_inner_globality: bool

    @property
    def passed(self) -> bool:
        return all(c.status == "pass" for c in self.checks)

    def get(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def diagnose_sequence(seq: MinimizingSequence, problem: Problem, beta_limit: Optional[float] = None,
                      eps: float = 1e-6, tail_tol: float = 1e-4, p_tol: float = 1e-3,
                      omega_lower=None, min_tail: int = 3) -> SequenceDiagnostics:
    """Checks of the minimizing-sequence conclusions on the tail of ``seq``.

    1. ``phi -> 0``: final phi <= tail_tol and the tail does not increase by
       more than tail_tol.
    2. ``p -> p0`` (only when ``omega_lower`` is given, i.e. phi >= omega(p)):
       final p <= p_tol and omega(p) <= phi on the tail.
    3. the final iterate is feasible within tail_tol.
    4. liminf / limsup of f over the tail lie in [lim beta - tol, lim beta + eps + tol].
    5. with lim beta = f*: f* - tol <= liminf <= limsup <= f* + eps + tol.

    With fewer than ``min_tail`` successful records the trend checks are
    "inconclusive".  ``beta_limit`` defaults to the problem's known optimum.
    """
    if not seq.records:
        raise InvalidInputError("empty sequence")
    ok = [r for r in seq.records if r.inner_status == "ok"]
    tail = ok[-max(min_tail, len(ok) // 3):] if ok else []
    checks = []
    enough = len(ok) >= min_tail

    def status(cond):
        return "pass" if cond else "fail"

    if not enough:
        for name in ("phi_to_zero", "p_to_p0", "cluster_feasible", "f_window", "zero_gap_window"):
            checks.append(CheckResult(name, "inconclusive", {"records": len(ok)}))
        return SequenceDiagnostics(checks, problem.dim > 3)

    phis = np.array([r.phi_value for r in tail])
    checks.append(CheckResult("phi_to_zero", status(phis[-1] <= tail_tol and np.all(np.diff(phis) <= tail_tol)),
                              {"final_phi": float(phis[-1]), "tail_phi": phis.tolist()}))
    ps = np.array([r.p for r in tail])
    if omega_lower is not None:
        om = np.asarray(omega_lower(ps), dtype=float)
        cond = ps[-1] <= p_tol and np.all(om <= phis + 1e-12)
        checks.append(CheckResult("p_to_p0", status(cond), {"final_p": float(ps[-1])}))
    else:
        checks.append(CheckResult("p_to_p0", "inconclusive", {"final_p": float(ps[-1]), "reason": "no omega bound"}))
    dist = float(residual_distance(problem, tail[-1].x))
    checks.append(CheckResult("cluster_feasible", status(dist <= tail_tol), {"final_residual": dist}))
    fs = np.array([r.f_value for r in tail])
    lo, hi = float(np.min(fs)), float(np.max(fs))
    limit = problem.known_fstar if beta_limit is None else beta_limit
    if limit is None:
        checks.append(CheckResult("f_window", "inconclusive", {"liminf": lo, "limsup": hi}))
        checks.append(CheckResult("zero_gap_window", "inconclusive", {"liminf": lo, "limsup": hi}))
    else:
        cond = lo >= limit - tail_tol and hi <= limit + eps + tail_tol
        checks.append(CheckResult("f_window", status(cond), {"liminf": lo, "limsup": hi, "beta_limit": limit}))
        fstar = problem.known_fstar
        if fstar is None:
            checks.append(CheckResult("zero_gap_window", "inconclusive", {"liminf": lo, "limsup": hi}))
        else:
            cond = fstar - tail_tol <= lo <= hi <= fstar + eps + tail_tol
            checks.append(CheckResult("zero_gap_window", status(cond), {"liminf": lo, "limsup": hi, "fstar": fstar}))
    return SequenceDiagnostics(checks, problem.dim > 3)
