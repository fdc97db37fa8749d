"""Singular penalty term

    phi(x, p) = 0                                  if x feasible and p = 0,
              = +inf                               if x infeasible and p = 0,
              = phi(d(0, G(x) - p w)^2) / p + omega(p)   if p > 0,

its sandwich constants, the local exact-penalty-parameter bound, and the
numerical infimum over p.  Also home of the (non-exact) Lian-Zhang-type term
kept as a regression case.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, InvalidInputError
from .oracle import p_search
from .penalty import ParameterSpace, ParametricPenalty
from .problem import Norm, Problem

#: Parameters below this value are evaluated with the p = 0 branch.
P_ZERO = 1e-14

GROWTH_SAMPLES = 10_000


@dataclass(frozen=True)
class ScalarGrowthFunction:
    """Non-decreasing g: [0, inf] -> [0, inf] with g(0) = 0 and declared slopes
    ``lower_slope * t <= g(t) <= upper_slope * t`` on ``[0, valid_until]``.

    The declaration is verified on a dense sample at construction and a
    :class:`ConfigurationError` is raised when it fails.
    """

    evaluator: Callable
    lower_slope: float
    upper_slope: float
    valid_until: float
    name: str = "g"
    derivative: Optional[Callable] = None
    verify: bool = field(default=True, repr=False)

    def __post_init__(self):
        if not (0 < self.lower_slope <= self.upper_slope):
            raise ConfigurationError("need 0 < lower_slope <= upper_slope")
        if not (self.valid_until > 0):
            raise ConfigurationError("valid_until must be positive")
        if self.verify:
            self.check_declaration()

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.asarray(self.evaluator(t), dtype=float)

    def check_declaration(self, n: int = GROWTH_SAMPLES):
        t = np.linspace(0.0, min(self.valid_until, 1e300), n)
        g = self(t)
        if g[0] != 0.0:
            raise ConfigurationError(f"{self.name}(0) must be 0")
        if np.any(np.diff(g) < -1e-15 * np.maximum(1.0, np.abs(g[1:]))):
            raise ConfigurationError(f"{self.name} is not non-decreasing on the sample")
        slack = 1e-12 * np.maximum(1.0, t)
        if np.any(g < self.lower_slope * t - slack) or np.any(g > self.upper_slope * t + slack):
            raise ConfigurationError(
                f"{self.name}: declared slopes [{self.lower_slope}, {self.upper_slope}] "
                f"violated on [0, {self.valid_until}]"
            )
        if np.any(g[1:] <= 0):
            raise ConfigurationError(f"{self.name}(t) must be positive for t > 0")


def identity_growth() -> ScalarGrowthFunction:
    return ScalarGrowthFunction(lambda t: t, 1.0, 1.0, np.inf, "t", lambda t: np.ones_like(t))


def linear_growth(c: float, valid_until: float = np.inf) -> ScalarGrowthFunction:
    if c <= 0:
        raise ConfigurationError("slope must be positive")
    return ScalarGrowthFunction(lambda t: c * t, c, c, valid_until, f"{c:g}*t",
                                lambda t: np.full_like(t, c))


def saturating_growth(t0: float = 1.0) -> ScalarGrowthFunction:
    """t / (1 + t): bounded, slope 1 at the origin, slope >= 1/(1+t0) on [0, t0]."""

    def g(t):
        with np.errstate(invalid="ignore"):
            return np.where(np.isinf(t), 1.0, t / (1.0 + t))

    return ScalarGrowthFunction(g, 1.0 / (1.0 + t0), 1.0, t0, "t/(1+t)", lambda t: 1.0 / (1.0 + t) ** 2)


def clipped_growth(t0: float = 1.0) -> ScalarGrowthFunction:
    """min(t, t0): exactly linear up to t0."""
    return ScalarGrowthFunction(lambda t: np.minimum(t, t0), 1.0, 1.0, t0, f"min(t,{t0:g})",
                                lambda t: (t < t0).astype(float))


GROWTH_FACTORIES = {
    "linear": lambda: identity_growth(),
    "identity": lambda: identity_growth(),
    "saturating": lambda: saturating_growth(1.0),
    "clipped": lambda: clipped_growth(1.0),
}


def growth_from_name(name: str, scale: float = 1.0) -> ScalarGrowthFunction:
    if name not in GROWTH_FACTORIES:
        raise ConfigurationError(f"unknown growth function {name!r}")
    if name in ("linear", "identity") and scale != 1.0:
        return linear_growth(scale)
    g = GROWTH_FACTORIES[name]()
    if scale != 1.0:
        raise ConfigurationError("only linear growth functions accept a scale")
    return g


@dataclass
class SingularConfig:
    """Data of the singular term: growth functions, shift direction, norm.

    Parameters
    ----------
    phi, omega : ScalarGrowthFunction
    w : array_like or None
        Shift direction of length m + l; ``None`` means the zero vector.
    norm : Norm or str, optional
        Overrides the problem's norm when given.
    t0 : float, optional
        Common validity range of the slope bounds; defaults to the smaller of
        the two declared ranges.
    """

    phi: ScalarGrowthFunction = field(default_factory=identity_growth)
    omega: ScalarGrowthFunction = field(default_factory=identity_growth)
    w: Optional[np.ndarray] = None
    norm: Optional[Norm] = None
    t0: Optional[float] = None

    def __post_init__(self):
        if self.w is not None:
            self.w = np.atleast_1d(np.asarray(self.w, dtype=float))
            if self.w.ndim != 1 or not np.all(np.isfinite(self.w)):
                raise ConfigurationError("w must be a finite vector")
        if self.norm is not None:
            self.norm = Norm.parse(self.norm)
        limit = min(self.phi.valid_until, self.omega.valid_until)
        if self.t0 is None:
            self.t0 = limit
        elif not (0 < self.t0 <= limit):
            raise ConfigurationError(f"t0 must lie in (0, {limit}]")

    phi0 = property(lambda self: self.phi.lower_slope)
    Phi0 = property(lambda self: self.phi.upper_slope)
    omega0 = property(lambda self: self.omega.lower_slope)
    Omega0 = property(lambda self: self.omega.upper_slope)

    def norm_for(self, problem: Problem) -> Norm:
        return self.norm if self.norm is not None else problem.norm

    @property
    def w_norm(self) -> float:
        if self.w is None:
            return 0.0
        return float((self.norm or Norm.L2)(self.w))

    def w_for(self, problem: Problem) -> np.ndarray:
        size = problem.constraints.size
        if self.w is None:
            return np.zeros(size)
        if self.w.size != size:
            raise InvalidInputError(f"w has length {self.w.size}, problem has {size} constraints")
        return self.w

    def describe(self) -> str:
        w = "0" if self.w is None or not np.any(self.w) else ",".join(f"{v:g}" for v in self.w)
        return f"singular:phi={self.phi.name},omega={self.omega.name},w={w}"


def _distance_from_values(c: np.ndarray, m: int, P: np.ndarray, w: np.ndarray, norm: Norm) -> np.ndarray:
    """d(0, G(x) - p w) from precomputed constraint values ``c`` (..., m+l)."""
    v = c - P[..., None] * w
    v[..., m:] = np.maximum(0.0, v[..., m:])
    return norm(v)


def _term_from_values(cfg: SingularConfig, c, m, P, w, norm, feasible):
    P = np.asarray(P, dtype=float)
    small = P < P_ZERO
    Ps = np.where(small, 1.0, P)
    d = _distance_from_values(c, m, Ps, w, norm)
    with np.errstate(over="ignore", invalid="ignore"):
        val = cfg.phi(d * d) / Ps + cfg.omega(Ps)
    zero_branch = np.where(feasible, 0.0, np.inf)
    return np.where(small, zero_branch, val)


def eval_singular_term(cfg: SingularConfig, problem: Problem, x, p):
    """The three-branch singular term, vectorized over ``x`` and ``p``."""
    P = np.asarray(p, dtype=float)
    if np.any(P < 0):
        raise InvalidInputError("p must be nonnegative")
    c = problem.constraint_values(x)
    m = problem.constraints.m
    norm = cfg.norm_for(problem)
    w = cfg.w_for(problem)
    feasible = _distance_from_values(c, m, np.zeros(c.shape[:-1]), w, norm) == 0
    out = _term_from_values(cfg, c, m, P, w, norm, feasible)
    return float(out) if np.ndim(out) == 0 else out


def inf_over_p(cfg: SingularConfig, problem: Problem, x, rtol: float = 1e-10):
    """``(inf_{p >= 0} phi(x, p), argmin p)`` by bracketed golden-section search.

    The search interval is ``[1e-12, max(10, 10 d sqrt(Phi0/omega0))]`` with
    ``d = d(0, G(x))``; a 64-point logarithmic scan selects the bracket, the
    golden-section search runs to relative tolerance ``rtol`` and one
    parabolic step polishes the result.  Feasible points return ``(0, 0)``.
    """
    X = problem._check(x)
    shape = X.shape[:-1]
    c = problem.constraint_values(X).reshape(-1, problem.constraints.size)
    m = problem.constraints.m
    norm = cfg.norm_for(problem)
    w = cfg.w_for(problem)
    d0 = _distance_from_values(c, m, np.zeros(c.shape[0]), w, norm)
    feasible = d0 == 0
    vals = np.zeros(c.shape[0])
    args = np.zeros(c.shape[0])
    idx = np.flatnonzero(~feasible)
    if idx.size:
        ci = c[idx]
        hi = np.maximum(10.0, 10.0 * d0[idx] * np.sqrt(cfg.Phi0 / cfg.omega0))
        lo = np.full(idx.size, 1e-12)

        def fun2d(P):
            cc = ci.reshape(ci.shape[0], *([1] * (P.ndim - 1)), ci.shape[1])
            return _term_from_values(cfg, cc, m, P, w, norm, np.zeros(P.shape, bool))

        v, a = p_search(fun2d, lo, hi, n_grid=64, rtol=rtol)
        vals[idx], args[idx] = v, a
    vals, args = vals.reshape(shape), args.reshape(shape)
    if vals.ndim == 0:
        return float(vals), float(args)
    return vals, args


def upper_bound_constant(cfg: SingularConfig) -> float:
    """C0 = 2 (sqrt(Phi0^2 |w|^2 + Phi0 Omega0) + Phi0 |w|)."""
    wn = cfg.w_norm
    return 2.0 * (np.sqrt(cfg.Phi0**2 * wn**2 + cfg.Phi0 * cfg.Omega0) + cfg.Phi0 * wn)


def upper_bound_radius(cfg: SingularConfig) -> float:
    """Radius delta with inf_p phi(x, p) <= C0 d(0, G(x)) whenever d(0, G(x)) < delta.

    With k = sqrt(Phi0 / (Phi0 |w|^2 + Omega0)) the choice p = k d keeps both
    p <= t0 and (d + p |w|)^2 <= t0 as long as d < min(t0 / k, sqrt(t0) / (1 + k |w|)).
    """
    wn = cfg.w_norm
    k = np.sqrt(cfg.Phi0 / (cfg.Phi0 * wn**2 + cfg.Omega0))
    t0 = cfg.t0
    return float(min(t0 / k, np.sqrt(t0) / (1.0 + k * wn)))


def lower_bound_constant(cfg: SingularConfig) -> tuple[float, float]:
    """(c0, delta0) with phi(x, p) >= c0 d(0, G(x)) whenever phi(x, p) < delta0."""
    wn = cfg.w_norm
    first = np.inf if wn == 0 else cfg.omega0 / wn
    second = 2.0 * np.sqrt(cfg.phi0 * cfg.omega0 + cfg.phi0**2 * wn**2) - 2.0 * cfg.phi0 * wn
    c0 = float(min(first, second))
    delta0 = float(min(cfg.omega0, cfg.omega0 * cfg.t0, cfg.phi0 * cfg.t0))
    return c0, delta0


def local_exactness_bound(L: float, tau: float, cfg: SingularConfig) -> float:
    """lambda_bar = L (sqrt(phi0) |w| + sqrt(omega0 + phi0 |w|^2)) / (2 omega0 sqrt(phi0) tau)."""
    if L <= 0 or tau <= 0:
        raise InvalidInputError("L and tau must be positive")
    wn = cfg.w_norm
    num = L * (np.sqrt(cfg.phi0) * wn + np.sqrt(cfg.omega0 + cfg.phi0 * wn**2))
    return float(num / (2.0 * cfg.omega0 * np.sqrt(cfg.phi0) * tau))


def singular_penalty(problem: Problem, cfg: Optional[SingularConfig] = None, name: Optional[str] = None) -> ParametricPenalty:
    cfg = SingularConfig() if cfg is None else cfg
    cfg.w_for(problem)  # validate length now

    def term(X, P):
        return eval_singular_term(cfg, problem, X, P)

    return ParametricPenalty(
        problem,
        term,
        ParameterSpace.HALF_LINE,
        name=name or cfg.describe(),
        inf_term=lambda X: inf_over_p(cfg, problem, X),
        omega_lower=cfg.omega,
        p_scale=1.0,
        config=cfg,
    )


# ------------------------------------------------------------ Lian-Zhang term


def lianzhang_term(problem: Problem, x, p, a: float = 1.0, w=None):
    """Delta / (2 (p + 1) (1 - a Delta)) + p for p > 0 and Delta < 1/a, with
    Delta = |F(x) - p w|^2 (Euclidean); 0 at feasible x with p = 0; +inf otherwise."""
    if a <= 0:
        raise InvalidInputError("a must be positive")
    size = problem.constraints.size
    w = np.zeros(size) if w is None else np.broadcast_to(np.asarray(w, dtype=float), (size,))
    P = np.asarray(p, dtype=float)
    c = problem.constraint_values(x)
    m = problem.constraints.m
    feasible = _distance_from_values(c, m, np.zeros(c.shape[:-1]), w, Norm.L2) == 0
    delta = _distance_from_values(c, m, P, w, Norm.L2) ** 2
    ok = (P > 0) & (delta < 1.0 / a)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = delta / (2.0 * (P + 1.0) * (1.0 - a * np.where(ok, delta, 0.0))) + P
    out = np.where(ok, val, np.where((P == 0) & feasible, 0.0, np.inf))
    return float(out) if np.ndim(out) == 0 else out


def lianzhang_penalty(problem: Problem, a: float = 1.0, w=1.0) -> ParametricPenalty:
    wv = None if w is None else np.broadcast_to(np.asarray(w, dtype=float), (problem.constraints.size,))

    def term(X, P):
        return lianzhang_term(problem, X, P, a=a, w=wv)

    return ParametricPenalty(problem, term, ParameterSpace.HALF_LINE, name="lianzhang-term", p_scale=1.0)
