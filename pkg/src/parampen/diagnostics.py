"""Brute-force checks of exactness, duality-gap, calmness and bound properties
of parametric penalties on small problems (dimension <= 3).

All checks rest on the reduction

    inf_{x, p} F_lambda(x, p) = inf_x [ f(x) + lambda * psi(x) ],  psi(x) = inf_p phi(x, p),

so a grid over x with psi precomputed once serves every lambda.  Grid checks
can exhibit a witness against exactness, but can only give evidence for it;
the verdict names reflect that asymmetry.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInputError
from .oracle import box_grid, default_step, evaluate_chunked, finite_box, oracle_fstar, refine_candidates
from .penalty import ParametricPenalty
from .problem import Problem, residual_distance
from .singular import (
    SingularConfig,
    eval_singular_term,
    inf_over_p,
    lower_bound_constant,
    upper_bound_constant,
    upper_bound_radius,
)

MEMBERSHIP_RTOL = 1e-9


def _member(values, eta):
    """Relaxed-set membership ``values <= eta`` with a relative slack."""
    return np.asarray(values) <= eta * (1.0 + MEMBERSHIP_RTOL)


class _ReducedGrid:
    """Grid over the (finite surrogate) box with f, psi and d(0, G) cached."""

    def __init__(self, pen: ParametricPenalty, problem: Problem, step=None, span: float = 10.0, extra=None):
        if problem.dim > 3:
            raise InvalidInputError("brute-force diagnostics are limited to dimension <= 3")
        self.pen, self.problem = pen, problem
        self.step = default_step(problem.dim) if step is None else float(step)
        if self.step <= 0:
            raise InvalidInputError("grid step must be positive")
        self.lo, self.hi = finite_box(problem, span)
        X = box_grid(self.lo, self.hi, self.step)
        pts = list(problem.known_minimizers)
        if extra is not None:
            pts.extend(np.atleast_2d(extra))
        if pts:
            X = np.vstack([X, np.clip(np.atleast_2d(np.asarray(pts, dtype=float)), self.lo, self.hi)])
        self.X = X
        self.fX = evaluate_chunked(problem.f, X)
        self.psiX = evaluate_chunked(self.psi, X)
        self.dX = evaluate_chunked(lambda Y: residual_distance(problem, Y), X)

    def psi(self, X):
        return self.pen.inf_phi(X)[0]

    def reduced(self, lam: float):
        problem, psi = self.problem, self.psi

        def g(X):
            f = problem.f(X)
            if lam == 0:
                return f
            v = psi(X)
            with np.errstate(invalid="ignore"):
                return np.where(np.isinf(v), np.inf, f + lam * v)

        return g

    def inf_F(self, lam: float):
        """(value, x, p) of the grid infimum of F_lambda."""
        with np.errstate(invalid="ignore"):
            V = self.fX if lam == 0 else np.where(np.isinf(self.psiX), np.inf, self.fX + lam * self.psiX)
        res = refine_candidates(self.reduced(lam), self.X, V, self.lo, self.hi, self.step)
        _, p = self.pen.inf_phi(res.x[None, :])
        return res.value, res.x, float(p[0])

    def constrained_min(self, values_X, value_fn, eta: float):
        """min f over {value <= eta} with zoom refinement around the best members."""
        V = np.where(_member(values_X, eta), self.fX, np.inf)
        if not np.any(np.isfinite(V)):
            return math.inf, None
        problem = self.problem

        def g(X):
            return np.where(_member(value_fn(X), eta), problem.f(X), np.inf)

        res = refine_candidates(g, self.X, V, self.lo, self.hi, self.step)
        return res.value, res.x


# ------------------------------------------------------------ perturbation functions


@dataclass
class PerturbationCurve:
    """beta(eta) = inf{f(x) : inf_p phi(x, p) <= eta} and
    gamma(eta) = inf{f(x) : d(0, G(x)) <= eta} on a decreasing eta grid."""

    etas: np.ndarray
    beta_values: np.ndarray
    gamma_values: Optional[np.ndarray]
    beta0: float
    gamma0: Optional[float]
    oracle_grid_step: float
    monotonicity_violations: list = field(default_factory=list)
    above_fstar: list = field(default_factory=list)

    def rows(self):
        g = self.gamma_values if self.gamma_values is not None else [math.nan] * len(self.etas)
        return [(float(e), float(b), float(c)) for e, b, c in zip(self.etas, self.beta_values, g)]


def geometric_etas(largest: float = 1.0, smallest: float = 1e-3, per_decade: int = 4) -> np.ndarray:
    n = int(round(per_decade * math.log10(largest / smallest))) + 1
    return np.geomspace(largest, smallest, max(n, 2))


def perturbation_function(pen: ParametricPenalty, problem: Problem, etas, grid_step=None,
                          with_gamma: bool = True, span: float = 10.0, _grid=None) -> PerturbationCurve:
    """Grid values of the perturbation functions.

    Membership in the relaxed set uses ``<=`` with relative slack
    ``MEMBERSHIP_RTOL`` for every eta.  Empty relaxed sets give ``inf``.
    Monotonicity is checked, not enforced: violations are listed as index
    pairs ``(i, i + 1)``.
    """
    etas = np.asarray(etas, dtype=float)
    if etas.ndim != 1 or etas.size == 0 or np.any(etas <= 0) or np.any(np.diff(etas) >= 0):
        raise InvalidInputError("etas must be positive and strictly decreasing")
    grid = _grid or _ReducedGrid(pen, problem, grid_step, span)

    def curve(values_X, fn):
        out = np.array([grid.constrained_min(values_X, fn, e)[0] for e in etas])
        zero = grid.constrained_min(values_X, fn, 0.0)[0]
        return out, zero

    beta, beta0 = curve(grid.psiX, grid.psi)
    gamma = gamma0 = None
    if with_gamma:
        gamma, gamma0 = curve(grid.dX, lambda X: residual_distance(problem, X))
    viol = [(i, i + 1) for i in range(len(etas) - 1)
            if np.isfinite(beta[i]) and beta[i + 1] < beta[i] - 1e-12 * (1 + abs(beta[i]))]
    fstar = problem.known_fstar
    above = [] if fstar is None else [i for i, b in enumerate(beta) if b > fstar + 1e-12 * (1 + abs(fstar))]
    return PerturbationCurve(etas, beta, gamma, float(beta0), None if gamma0 is None else float(gamma0),
                             grid.step, viol, above)


def extrapolate_limit(etas, values) -> tuple[float, list]:
    """Aitken (Richardson-type) extrapolation of ``values`` as eta -> 0 from the
    three smallest etas; returns (estimate, raw tail)."""
    etas = np.asarray(etas, dtype=float)
    values = np.asarray(values, dtype=float)
    ok = np.isfinite(values)
    order = np.argsort(etas[ok])[::-1]
    e, v = etas[ok][order], values[ok][order]
    tail = list(zip(e[-3:].tolist(), v[-3:].tolist()))
    if v.size == 0:
        return math.inf, tail
    if v.size < 3:
        return float(v[-1]), tail
    b1, b2, b3 = v[-3:]
    d1, d2 = b2 - b1, b3 - b2
    den = d2 - d1
    if abs(den) <= 1e-14 * (1 + abs(b3)) or abs(d2) <= 1e-15 * (1 + abs(b3)):
        return float(b3), tail
    est = b3 - d2 * d2 / den
    # a geometric tail can only overshoot in the direction of the trend
    if not np.isfinite(est) or abs(est - b3) > 10 * abs(b3 - b1) + 1e-12:
        return float(b3), tail
    return float(est), tail


# ------------------------------------------------------------ duality gap


@dataclass
class DualityGapReport:
    lambdas: list
    h_values: list
    sup_h: float
    lim_beta: float
    beta_tail: list
    beta0: float
    fstar: Optional[float]
    theorem_gap: float
    duality_gap: Optional[float]
    tol: float
    passed: bool
    aborted: bool = False
    reason: str = ""

    @property
    def gap(self) -> float:
        parts = [self.theorem_gap]
        if self.duality_gap is not None:
            parts.append(abs(self.duality_gap))
        return float(max(parts))

    def __bool__(self):
        return self.passed


UNBOUNDED_LEVEL = -1e12


def zero_duality_gap_test(pen: ParametricPenalty, problem: Problem, lambda_grid, curve: PerturbationCurve,
                          tol: float = 1e-2, span: float = 10.0, _grid=None) -> DualityGapReport:
    """Compare h(lambda) = inf F_lambda against the perturbation function.

    Two numbers are measured: ``theorem_gap = |sup_lambda h - lim beta|`` (the
    sup over the penalty family equals the lower limit of beta) and
    ``duality_gap = f* - sup_lambda h``.  The test passes when both are within
    ``tol``.  If h at the top lambda is ``-inf`` or below -1e12 the penalty
    family is unbounded below and the test aborts.
    """
    lams = [float(v) for v in lambda_grid]
    if not lams or any(v < 0 for v in lams) or any(b <= a for a, b in zip(lams, lams[1:])):
        raise InvalidInputError("lambda grid must be nonnegative and increasing")
    grid = _grid or _ReducedGrid(pen, problem, curve.oracle_grid_step, span)
    h = [grid.inf_F(lam)[0] for lam in lams]
    lim_beta, tail = extrapolate_limit(curve.etas, curve.beta_values)
    fstar = problem.known_fstar if problem.known_fstar is not None else (
        curve.beta0 if np.isfinite(curve.beta0) else None)
    if not np.isfinite(h[-1]) or h[-1] <= UNBOUNDED_LEVEL:
        return DualityGapReport(lams, h, -math.inf, lim_beta, tail, curve.beta0, fstar, math.inf, None, tol,
                                False, True, "penalty function unbounded below on the grid")
    sup_h = float(max(h))
    theorem_gap = abs(sup_h - lim_beta)
    duality_gap = None if fstar is None else float(fstar - sup_h)
    passed = theorem_gap <= tol and duality_gap is not None and abs(duality_gap) <= tol
    return DualityGapReport(lams, h, sup_h, lim_beta, tail, curve.beta0, fstar, float(theorem_gap),
                            duality_gap, tol, bool(passed))


# ------------------------------------------------------------ calmness


class Calmness(enum.Enum):
    CALM = "CALM"
    NOT_CALM = "NOT_CALM"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass
class CalmnessResult:
    status: Calmness
    slope_estimate: Optional[float]
    quotients: list
    growth_exponent: Optional[float] = None

    @property
    def calm(self) -> Optional[bool]:
        return None if self.status is Calmness.INCONCLUSIVE else self.status is Calmness.CALM

    def __iter__(self):
        return iter((self.calm, self.slope_estimate))


def calmness_test(curve: PerturbationCurve, min_tail: int = 4, growth_threshold: float = 0.25) -> CalmnessResult:
    """Calmness from below of beta at 0.

    The tail is the smaller-eta half of the finite part of the curve (at least
    ``min_tail`` points).  Quotients q = (beta(eta) - beta(0)) / eta; the
    slope estimate is their minimum.  beta is declared not calm when the
    negative quotients grow like eta**(-k) with fitted k > ``growth_threshold``.
    """
    ok = np.isfinite(curve.beta_values)
    etas, beta = curve.etas[ok], curve.beta_values[ok]
    if not np.isfinite(curve.beta0) or etas.size < min_tail:
        return CalmnessResult(Calmness.INCONCLUSIVE, None, [])
    n = max(min_tail, etas.size // 2)
    e, b = etas[-n:], beta[-n:]
    q = (b - curve.beta0) / e
    slope = float(np.min(q))
    neg = q < 0
    k = None
    if np.sum(neg) >= min_tail:
        k = float(np.polyfit(np.log(1.0 / e[neg]), np.log(-q[neg]), 1)[0])
    status = Calmness.NOT_CALM if (k is not None and k > growth_threshold) else Calmness.CALM
    return CalmnessResult(status, slope, q.tolist(), k)


# ------------------------------------------------------------ exactness


class Verdict(enum.Enum):
    EXACT_EVIDENCE = "EXACT_EVIDENCE"
    NOT_EXACT_WITNESS = "NOT_EXACT_WITNESS"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass
class Witness:
    x: np.ndarray
    p: float
    lam: float
    F_value: float

    def __iter__(self):
        return iter((self.x, self.p, self.lam, self.F_value))


@dataclass
class ExactnessVerdict:
    verdict: Verdict
    witness: Optional[Witness]
    lambda_star_estimate: Optional[tuple]
    lambda_cap: float
    fstar: Optional[float] = None
    slack: float = 0.0
    inf_value: Optional[float] = None


def default_slack(fstar: float) -> float:
    return 1e-9 * (1.0 + abs(fstar))


def _resolve_fstar(problem: Problem, fstar, step, span):
    if fstar is not None:
        return float(fstar)
    if problem.known_fstar is not None:
        return float(problem.known_fstar)
    value, _ = oracle_fstar(problem, step, span=span)
    return value


def exactness_detector(pen: ParametricPenalty, problem: Problem, lambda_cap: float, grid_step=None,
                       fstar=None, slack: Optional[float] = None, span: float = 10.0,
                       lambda_tol: float = 1e-3, _grid=None) -> ExactnessVerdict:
    """Search for (x, p) with F_{lambda_cap}(x, p) < f* - slack.

    A grid witness is re-evaluated directly before it is reported.  Without
    a witness the infimum is also checked at ``2 * lambda_cap`` (it must not
    move below f* either) and lambda* is bracketed by bisection on [0, lambda_cap]
    to relative width ``lambda_tol``.
    """
    if lambda_cap < 0:
        raise InvalidInputError("lambda_cap must be nonnegative")
    grid = _grid or _ReducedGrid(pen, problem, grid_step, span)
    fstar = _resolve_fstar(problem, fstar, grid.step, span)
    if fstar is None:
        return ExactnessVerdict(Verdict.INCONCLUSIVE, None, None, lambda_cap)
    slack = default_slack(fstar) if slack is None else slack
    value, x, p = grid.inf_F(lambda_cap)
    if value < fstar - slack:
        F = float(pen.F(x, p, lambda_cap))
        if F < fstar - slack:
            return ExactnessVerdict(Verdict.NOT_EXACT_WITNESS, Witness(x, p, lambda_cap, F), None, lambda_cap,
                                    fstar, slack, value)
        return ExactnessVerdict(Verdict.INCONCLUSIVE, None, None, lambda_cap, fstar, slack, value)
    if grid.inf_F(2.0 * lambda_cap)[0] < fstar - slack:
        return ExactnessVerdict(Verdict.INCONCLUSIVE, None, None, lambda_cap, fstar, slack, value)

    def exact_at(lam):
        return grid.inf_F(lam)[0] >= fstar - slack

    lo, hi = 0.0, float(lambda_cap)
    if exact_at(0.0):
        interval = (0.0, 0.0)
    else:
        while hi - lo > lambda_tol * max(hi, 1e-12):
            mid = 0.5 * (lo + hi)
            if exact_at(mid):
                hi = mid
            else:
                lo = mid
        interval = (lo, hi)
    return ExactnessVerdict(Verdict.EXACT_EVIDENCE, None, interval, lambda_cap, fstar, slack, value)


# ------------------------------------------------------------ local exactness


@dataclass
class LocalProbeResult:
    lambdas: list
    radii: list
    violated: np.ndarray  # shape (len(lambdas), len(radii))
    witnesses: dict

    @property
    def evidence_lambdas(self) -> list:
        """Lambdas for which no radius shows a violation."""
        return [lam for lam, row in zip(self.lambdas, self.violated) if not np.any(row)]

    @property
    def locally_exact_evidence(self) -> bool:
        return bool(self.evidence_lambdas)


def _ball_points(x_star, r, lo, hi, n_radial=40, n_dirs=32, seed=0):
    d = x_star.size
    s = r * np.concatenate([np.geomspace(1e-8, 1.0, n_radial), np.linspace(0.05, 1.0, 20)])
    if d == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        rng = np.random.default_rng(seed)
        dirs = rng.standard_normal((n_dirs, d))
        dirs = np.vstack([np.eye(d), -np.eye(d), dirs / np.linalg.norm(dirs, axis=1, keepdims=True)])
    pts = x_star[None, None, :] + s[None, :, None] * dirs[:, None, :]
    return np.clip(pts.reshape(-1, d), lo, hi)


def local_exactness_probe(pen: ParametricPenalty, x_star, lambda_grid, radius_grid, n_p: int = 40,
                          seed: int = 0) -> LocalProbeResult:
    """Look for F_lambda(x, p) < F_lambda(x*, p0) with |x - x*| <= r and 0 <= p <= r.

    Samples: log-spaced and uniform radial offsets along coordinate and random
    directions; p in {0} and a log grid [1e-16, r].  Strict violations beyond a
    relative 1e-12 are reported together with the first witness found.
    """
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    problem = pen.problem
    lo, hi = problem.box.lower, problem.box.upper
    lams = [float(v) for v in lambda_grid]
    radii = [float(v) for v in radius_grid]
    violated = np.zeros((len(lams), len(radii)), dtype=bool)
    witnesses = {}
    for j, r in enumerate(radii):
        X = _ball_points(x_star, r, lo, hi, seed=seed)
        if pen.parametric:
            P = np.concatenate([[0.0], np.geomspace(1e-16, r, n_p)])
        else:
            P = np.zeros(1)
        XX = np.repeat(X, P.size, axis=0)
        PP = np.tile(P, X.shape[0])
        f = problem.f(XX)
        phi = pen.phi(XX, PP)
        f0 = float(problem.f(x_star))
        phi0 = float(pen.phi(x_star, 0.0))
        for i, lam in enumerate(lams):
            with np.errstate(invalid="ignore"):
                F = f if lam == 0 else np.where(np.isinf(phi), np.inf, f + lam * phi)
            F0 = f0 if lam == 0 else f0 + lam * phi0
            k = int(np.argmin(np.where(np.isnan(F), np.inf, F)))
            if F[k] < F0 - 1e-12 * (1.0 + abs(F0)):
                violated[i, j] = True
                witnesses[(lam, r)] = Witness(XX[k], float(PP[k]), lam, float(F[k]))
    return LocalProbeResult(lams, radii, violated, witnesses)


# ------------------------------------------------------------ non-degeneracy


@dataclass
class NondegeneracyReport:
    lambdas: list
    x_norms: list
    p_values: list
    max_norm: float
    box_scale: float
    unbounded_trend: bool


def nondegeneracy_probe(pen: ParametricPenalty, problem: Problem, ladder, cfg=None) -> NondegeneracyReport:
    """Track |x_lambda| and p_lambda of the best found minimizers along ``ladder``.

    An unbounded trend is flagged only for unbounded boxes, when the norms of
    the last third of the ladder are nondecreasing and end beyond ten times the
    box scale (largest finite bound, at least 1).
    """
    from .solver import SolverConfig, minimize_F

    lams = [float(v) for v in ladder]
    if any(b <= a for a, b in zip(lams, lams[1:])):
        raise InvalidInputError("ladder must be increasing")
    cfg = cfg or SolverConfig()
    norms, ps = [], []
    warm = None
    for lam in lams:
        res = minimize_F(pen, lam, warm, cfg)
        norms.append(float(np.linalg.norm(res.x)))
        ps.append(float(res.p))
        warm = (res.x, res.p)
    bounds = np.concatenate([problem.box.lower, problem.box.upper])
    scale = float(max(1.0, np.max(np.abs(bounds[np.isfinite(bounds)]), initial=0.0)))
    flagged = False
    if not problem.box.is_bounded:
        tail = norms[-max(2, len(norms) // 3):]
        flagged = all(b >= a for a, b in zip(tail, tail[1:])) and tail[-1] > 10.0 * scale
    return NondegeneracyReport(lams, norms, ps, float(max(norms)), scale, bool(flagged))


# ------------------------------------------------------------ sandwich bounds


@dataclass
class SandwichReport:
    c0: float
    delta0: float
    C0: float
    delta_upper: float
    lower_checked: int
    upper_checked: int
    lower_failures: list
    upper_failures: list

    @property
    def passed(self) -> bool:
        return not self.lower_failures and not self.upper_failures


def _sample_arrays(sample, dim):
    if isinstance(sample, tuple) and len(sample) == 2 and np.ndim(sample[1]) == 1 and np.ndim(sample[0]) == 2:
        X, P = sample
    else:
        pairs = list(sample)
        X = np.array([np.atleast_1d(np.asarray(x, dtype=float)) for x, _ in pairs]).reshape(len(pairs), dim)
        P = np.array([float(p) for _, p in pairs])
    return np.asarray(X, dtype=float), np.asarray(P, dtype=float)


def verify_sandwich_bounds(cfg: SingularConfig, problem: Problem, sample, lower_slack: float = 1e-9,
                           upper_slack: float = 1e-6) -> SandwichReport:
    """Check c0 * d <= phi(x, p) where phi < delta0 and inf_p phi <= C0 * d where
    d < delta_upper, with d = d(0, G(x)).  ``sample`` is a list of (x, p) pairs
    or a tuple of arrays ``(X, P)``."""
    X, P = _sample_arrays(sample, problem.dim)
    c0, delta0 = lower_bound_constant(cfg)
    C0 = upper_bound_constant(cfg)
    du = upper_bound_radius(cfg)
    norm = cfg.norm_for(problem)
    d = np.atleast_1d(residual_distance(problem, X, norm=norm))
    phi = np.atleast_1d(eval_singular_term(cfg, problem, X, P))
    low = phi < delta0
    bad_low = low & (phi < c0 * d - lower_slack)
    up = d < du
    lower_failures = [(X[i], float(P[i]), float(phi[i]), float(c0 * d[i])) for i in np.flatnonzero(bad_low)]
    upper_failures = []
    if np.any(up):
        v, _ = inf_over_p(cfg, problem, X[up])
        v = np.atleast_1d(v)
        idx = np.flatnonzero(up)
        for k in np.flatnonzero(v > C0 * d[up] + upper_slack):
            i = idx[k]
            upper_failures.append((X[i], float(v[k]), float(C0 * d[i])))
    return SandwichReport(c0, delta0, C0, du, int(np.sum(low)), int(np.sum(up)), lower_failures, upper_failures)


# ------------------------------------------------------------ beta / gamma consistency


def perturbation_consistency(cfg: SingularConfig, problem: Problem, etas, grid_step=None, slack=None,
                             span: float = 10.0) -> list:
    """Violations of beta(eta) >= gamma(eta / c0) and gamma(eta) >= beta(C0 eta)
    for eta below the lemma thresholds; returns a list of (kind, eta, lhs, rhs)."""
    from .singular import singular_penalty

    pen = singular_penalty(problem, cfg)
    grid = _ReducedGrid(pen, problem, grid_step, span)
    c0, delta0 = lower_bound_constant(cfg)
    C0 = upper_bound_constant(cfg)
    du = upper_bound_radius(cfg)
    slack = 2.0 * grid.step * (1.0 + abs(problem.known_fstar or 0.0)) if slack is None else slack

    def dist(X):
        return residual_distance(problem, X, norm=cfg.norm_for(problem))

    dX = evaluate_chunked(dist, grid.X)
    out = []
    for eta in np.asarray(etas, dtype=float):
        if eta < delta0:
            b = grid.constrained_min(grid.psiX, grid.psi, eta)[0]
            g = grid.constrained_min(dX, dist, eta / c0)[0]
            if b < g - slack:
                out.append(("beta>=gamma(eta/c0)", float(eta), b, g))
        if C0 * eta < delta0 and eta < du:
            g = grid.constrained_min(dX, dist, eta)[0]
            b = grid.constrained_min(grid.psiX, grid.psi, C0 * eta)[0]
            if g < b - slack:
                out.append(("gamma>=beta(C0 eta)", float(eta), g, b))
    return out


# ------------------------------------------------------------ reduction equivalence


@dataclass
class RatioProfile:
    """sup of (f* - f) / t per decade of t, from the smallest decade up."""

    decades: list
    sups: list
    sup: float
    growth_exponent: Optional[float]
    unbounded: bool


@dataclass
class ReductionReport:
    parametric_exact: bool
    standard_exact: bool
    parametric_threshold: float
    standard_threshold: float
    parametric_profile: RatioProfile
    standard_profile: RatioProfile
    delta: float
    theta: float
    lambda_cap: float

    @property
    def agree(self) -> bool:
        return self.parametric_exact == self.standard_exact

    def __bool__(self):
        return self.agree


def _ratio_profile(t, gap, upper, growth_threshold=0.25, tail_decades=6) -> RatioProfile:
    sel = (t > 0) & (t < upper) & (gap > 0) & np.isfinite(t)
    if not np.any(sel):
        return RatioProfile([], [], 0.0, None, False)
    t, r = t[sel], gap[sel] / t[sel]
    dec = np.floor(np.log10(t)).astype(int)
    decades = sorted(set(dec.tolist()))
    sups = [float(np.max(r[dec == k])) for k in decades]
    k = None
    unbounded = False
    if len(decades) >= 3:
        use = slice(0, min(tail_decades, len(decades)))
        x = -np.array(decades[use], dtype=float)
        y = np.log10(np.array(sups[use]))
        k = float(np.polyfit(x, y, 1)[0])
        unbounded = k > growth_threshold
    return RatioProfile(decades, sups, float(max(sups)), k, bool(unbounded))


def reduction_equivalence_test(cfg: SingularConfig, problem: Problem, delta: float, lambda_cap: float,
                               grid_step=None, fstar=None, theta: Optional[float] = None,
                               span: float = 10.0) -> ReductionReport:
    """Compare exactness of the singular F_lambda on Omega_delta with exactness of
    h_lambda = f + lambda d(0, G(x)) on {d < theta} (``theta`` defaults to delta).

    For each side the smallest exact lambda is sup (f* - f) / t over points with
    f < f* and 0 < t below the threshold, t = inf_p phi resp. d.  Points come
    from the box grid and from log-spaced offsets (1e-12 ... 1) around feasible
    grid points, so ratios are resolved decade by decade.  A side is not exact
    when its per-decade sups grow like t**(-k), k > 0.25, or exceed lambda_cap.
    """
    from .singular import singular_penalty

    if problem.dim > 2:
        raise InvalidInputError("reduction equivalence test is limited to dimension <= 2")
    theta = delta if theta is None else theta
    pen = singular_penalty(problem, cfg)
    grid = _ReducedGrid(pen, problem, grid_step, span)
    fstar = _resolve_fstar(problem, fstar, grid.step, span)
    if fstar is None:
        raise InvalidInputError("f* unavailable: no feasible grid point")
    feas = grid.X[grid.dX <= 0.0]
    if feas.shape[0] > 200:
        feas = feas[np.linspace(0, feas.shape[0] - 1, 200).astype(int)]
    s = np.geomspace(1e-12, 1.0, 121)
    if problem.dim == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        ang = np.linspace(0, 2 * np.pi, 16, endpoint=False)
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    near = (feas[:, None, None, :] + s[None, :, None, None] * dirs[None, None, :, :]).reshape(-1, problem.dim)
    near = np.clip(near, grid.lo, grid.hi)
    X = np.vstack([grid.X, near])
    f = np.concatenate([grid.fX, evaluate_chunked(problem.f, near)])
    psi = np.concatenate([grid.psiX, evaluate_chunked(grid.psi, near)])
    d = np.concatenate([grid.dX, evaluate_chunked(lambda Y: residual_distance(problem, Y, norm=cfg.norm_for(problem)), near)])
    gap = fstar - f
    prof_F = _ratio_profile(psi, gap, delta)
    prof_h = _ratio_profile(d, gap, theta)
    exact_F = not prof_F.unbounded and prof_F.sup <= lambda_cap
    exact_h = not prof_h.unbounded and prof_h.sup <= lambda_cap
    return ReductionReport(exact_F, exact_h, prof_F.sup if exact_F else math.inf,
                           prof_h.sup if exact_h else math.inf, prof_F, prof_h, delta, theta, lambda_cap)


def lambda_star_within_bound(verdict: ExactnessVerdict, bound: float, slack: float = 0.01) -> bool:
    """The bisection bracket of lambda* lies below a theoretical upper bound."""
    if verdict.lambda_star_estimate is None:
        return False
    return verdict.lambda_star_estimate[0] <= bound + slack
