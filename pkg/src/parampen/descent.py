"""Sampled rates of steepest descent and ascent.

The rate of steepest descent of g on a set A at x is

    g_A^down(x) = liminf_{y -> x, y in A} (g(y) - g(x)) / d(y, x),

and the rate of steepest ascent is the corresponding limsup.  A liminf is not
computable, so the estimators sample y on shells ``{r/2 <= d(y, x) <= r}``
for a decreasing list of radii, reject samples outside A, and report the
minimum (maximum) difference quotient on the smallest shell that has
admissible samples, together with the per-shell values so the trend can be
inspected.

Samples depend only on ``(seed, dimension, radii, budget)``, so estimates of
different functions at the same point share their sample sets; sampled
versions of the sum rules then hold exactly rather than up to noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidInputError
from .problem import residual_distance

DEFAULT_RADII = (1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5)


def euclidean(v: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(v * v, axis=-1))


def sum_metric(split: int) -> Callable:
    """Product-space metric ``|dx| + |dy|`` with the first ``split`` coordinates as x.

    Shell sampling with this metric also draws pure-x and pure-y moves, so that
    sequences along either factor are represented.
    """

    def metric(v):
        return euclidean(v[..., :split]) + euclidean(v[..., split:])

    metric.split = split
    return metric


@dataclass
class RsdConfig:
    """Sampling budget.

    Attributes
    ----------
    samples_per_shell : int
    radii : sequence of float
        Strictly decreasing, smallest >= 1e-8.
    seed : int
    metric : callable, optional
        Norm of a displacement (last axis); Euclidean by default.
    """

    samples_per_shell: int = 10_000
    radii: Sequence[float] = DEFAULT_RADII
    seed: int = 0
    metric: Optional[Callable] = None

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        if r.ndim != 1 or r.size == 0 or np.any(np.diff(r) >= 0) or r[-1] < 1e-8:
            raise InvalidInputError("radii must be strictly decreasing and >= 1e-8")
        if self.samples_per_shell < 1:
            raise InvalidInputError("samples_per_shell must be positive")
        self.radii = tuple(float(v) for v in r)


@dataclass
class RsdEstimate:
    value: float
    radii: tuple
    per_radius_min: list
    samples_per_radius: int
    seed: int
    admissible_counts: list = field(default_factory=list)
    no_admissible_samples: bool = False

    @property
    def per_radius(self) -> list:
        """Alias for the per-shell extreme quotients (minima for descent, maxima for ascent)."""
        return self.per_radius_min


def shell_offsets(dim: int, cfg: RsdConfig, shell: int, n: Optional[int] = None) -> np.ndarray:
    """Displacements with ``metric(offset)`` uniform-in-volume on ``[r/2, r]``."""
    n = cfg.samples_per_shell if n is None else n
    rng = np.random.default_rng([cfg.seed, dim, shell])
    u = rng.standard_normal((n, dim))
    metric = cfg.metric or euclidean
    split = getattr(metric, "split", None)
    if split is not None and 0 < split < dim:
        q = n // 4
        u[:q, split:] = 0.0
        u[q : 2 * q, :split] = 0.0
    u /= metric(u)[:, None]
    r = cfg.radii[shell]
    lo = (r / 2) ** dim
    rho = (lo + rng.uniform(size=n) * (r**dim - lo)) ** (1.0 / dim)
    return u * rho[:, None]


def _shell_quotients(g: Callable, membership: Callable, x: np.ndarray, cfg: RsdConfig):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not bool(np.all(membership(x[None, :]))):
        raise InvalidInputError("the base point is not in the set")
    gx = float(np.asarray(g(x[None, :]))[0])
    if not np.isfinite(gx):
        raise InvalidInputError("g must be finite at the base point")
    metric = cfg.metric or euclidean
    out = []
    for k in range(len(cfg.radii)):
        off = shell_offsets(x.size, cfg, k)
        Y = x + off
        ok = np.asarray(membership(Y), dtype=bool)
        if not np.any(ok):
            out.append(np.empty(0))
            continue
        gy = np.asarray(g(Y[ok]), dtype=float)
        with np.errstate(invalid="ignore"):
            q = (gy - gx) / metric(off[ok])
        out.append(np.where(np.isnan(q), np.inf, q))
    return out


def _summarize(quotients, cfg: RsdConfig, reducer, empty_value) -> RsdEstimate:
    per = [float(reducer(q)) if q.size else float("nan") for q in quotients]
    counts = [int(q.size) for q in quotients]
    nonempty = [i for i, c in enumerate(counts) if c]
    if not nonempty:
        return RsdEstimate(empty_value, cfg.radii, per, cfg.samples_per_shell, cfg.seed, counts, True)
    return RsdEstimate(per[nonempty[-1]], cfg.radii, per, cfg.samples_per_shell, cfg.seed, counts, False)


def _everywhere(Y):
    return np.ones(np.shape(Y)[:-1], dtype=bool)


def estimate_rsd(g: Callable, set_membership: Optional[Callable], x, config: Optional[RsdConfig] = None) -> RsdEstimate:
    """Sampled rate of steepest descent of ``g`` on ``{y : set_membership(y)}`` at ``x``.

    ``g`` and ``set_membership`` take ``(N, k)`` arrays.  Isolated points (no
    admissible sample on any shell) get value ``+inf`` and the flag
    ``no_admissible_samples``.
    """
    cfg = config or RsdConfig()
    q = _shell_quotients(g, set_membership or _everywhere, x, cfg)
    return _summarize(q, cfg, np.min, np.inf)


def estimate_rsa(g: Callable, set_membership: Optional[Callable], x, config: Optional[RsdConfig] = None) -> RsdEstimate:
    """Sampled rate of steepest ascent (maximum quotient; ``-inf`` at isolated points)."""
    cfg = config or RsdConfig()
    q = _shell_quotients(g, set_membership or _everywhere, x, cfg)
    return _summarize(q, cfg, np.max, -np.inf)


def batch_rsd(g: Callable, membership: Callable, X: np.ndarray, cfg: RsdConfig, chunk: int = 2048):
    """Sampled RSD at many base points sharing one offset set per shell.

    Returns ``(values, admissible)``: values use the smallest shell with an
    admissible sample (``+inf`` if none), ``admissible`` is False for
    isolated points.  Base points where ``g`` is not finite get ``nan``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, k = X.shape
    metric = cfg.metric or euclidean
    offsets = [shell_offsets(k, cfg, s) for s in range(len(cfg.radii))]
    dists = [metric(o) for o in offsets]
    values = np.full(n, np.inf)
    found = np.zeros(n, dtype=bool)
    for s0 in range(0, n, chunk):
        Xc = X[s0 : s0 + chunk]
        gx = np.asarray(g(Xc), dtype=float)
        vals = np.full(Xc.shape[0], np.inf)
        have = np.zeros(Xc.shape[0], dtype=bool)
        for off, dist in zip(offsets, dists):
            Y = Xc[:, None, :] + off[None, :, :]
            ok = np.asarray(membership(Y), dtype=bool)
            # evaluate only admissible samples; rejected ones are replaced by the base point
            Y = np.where(ok[..., None], Y, Xc[:, None, :])
            gy = np.asarray(g(Y), dtype=float)
            with np.errstate(invalid="ignore"):
                q = (gy - gx[:, None]) / dist[None, :]
            q = np.where(ok & ~np.isnan(q), q, np.inf)
            shell_has = np.any(ok, axis=1)
            vals = np.where(shell_has, np.min(q, axis=1), vals)
            have |= shell_has
        vals = np.where(np.isfinite(gx), vals, np.nan)
        values[s0 : s0 + chunk] = vals
        found[s0 : s0 + chunk] = have
    return values, found


# ------------------------------------------------------------ penalty-level tools


@dataclass
class StationarityReport:
    point: np.ndarray
    param: float
    rsd_value: float
    is_inf_stationary: bool
    is_feasible: bool
    no_admissible_samples: bool = False


def _joint(pen, lam):
    """F_lambda as a function of z = (x, p) (or of x alone for one-point P) and A x P membership."""
    d = pen.problem.dim
    box = pen.problem.box

    if pen.parametric:

        def g(Z):
            return pen.F(Z[..., :d], np.maximum(Z[..., d], 0.0), lam)

        def member(Z):
            return box.contains(Z[..., :d]) & (Z[..., d] >= 0)

        return g, member, d + 1, sum_metric(d)

    def g(Z):
        return pen.F(Z, 0.0, lam)

    return g, box.contains, d, euclidean


def _default_tol(Fvalue):
    return 1e-3 * (np.abs(Fvalue) + 1.0)


def _point_is_p0_feasible(pen, x, p):
    d = np.asarray(residual_distance(pen.problem, x))
    feas = (d == 0) & pen.problem.box.contains(x)
    return feas & (np.asarray(p) == 0) if pen.parametric else feas


def is_inf_stationary(pen, lam: float, x, p: float = 0.0, tol: Optional[float] = None,
                      config: Optional[RsdConfig] = None) -> StationarityReport:
    """Estimate (F_lambda)^down on A x P (sum metric) at (x, p) and flag values >= -tol."""
    g, member, k, metric = _joint(pen, lam)
    cfg = config or RsdConfig()
    cfg = RsdConfig(cfg.samples_per_shell, cfg.radii, cfg.seed, metric)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    z = np.append(x, p) if pen.parametric else x
    Fz = float(g(z[None, :])[0])
    feasible = bool(np.asarray(residual_distance(pen.problem, x)) == 0)
    if not np.isfinite(Fz):
        return StationarityReport(x, float(p), float("nan"), False, feasible)
    est = estimate_rsd(g, member, z, cfg)
    tol = _default_tol(Fz) if tol is None else tol
    return StationarityReport(x, float(p), est.value, bool(est.value >= -tol), feasible,
                              est.no_admissible_samples)


SCAN_CONFIG = RsdConfig(samples_per_shell=256, radii=(1e-3, 1e-5), seed=0)


def feasibility_preservation_scan(pen, lam: float, sample_grid, tol: Optional[float] = None,
                                  config: Optional[RsdConfig] = None) -> list:
    """Infeasible grid points (x, p) not in Omega x {p0} that look inf-stationary.

    ``sample_grid`` is an ``(N, d + 1)`` array of ``(x, p)`` rows (or ``(N, d)``
    for one-point parameter spaces), or a list of ``(x, p)`` pairs.  Points
    outside the domain of F_lambda are skipped.  An empty result is evidence,
    not proof, that F_lambda has no infeasible inf-stationary points.
    """
    g, member, k, metric = _joint(pen, lam)
    base = config or SCAN_CONFIG
    cfg = RsdConfig(base.samples_per_shell, base.radii, base.seed, metric)
    Z = _as_rows(sample_grid, k, pen.parametric)
    d = pen.problem.dim
    x, p = Z[:, :d], (Z[:, d] if pen.parametric else np.zeros(Z.shape[0]))
    skip = _point_is_p0_feasible(pen, x, p)
    Z = Z[~skip]
    values, found = batch_rsd(g, member, Z, cfg)
    Fz = np.asarray(g(Z), dtype=float)
    tols = _default_tol(Fz) if tol is None else np.full(Z.shape[0], tol)
    flagged = np.flatnonzero(np.isfinite(Fz) & (values >= -tols))
    dist = np.asarray(residual_distance(pen.problem, Z[:, :d]))
    reports = []
    for i in flagged:
        reports.append(StationarityReport(Z[i, :d].copy(), float(Z[i, d]) if pen.parametric else 0.0,
                                          float(values[i]), True, bool(dist[i] == 0), not found[i]))
    return reports


def _as_rows(sample, k, parametric):
    pairs = not isinstance(sample, np.ndarray) and len(sample) and isinstance(sample[0], tuple)
    if not pairs:
        Z = np.atleast_2d(np.asarray(sample, dtype=float))
    else:
        Z = np.array([np.append(np.atleast_1d(x), p) if parametric else np.atleast_1d(x)
                      for x, p in sample], dtype=float)
    if Z.shape[-1] != k:
        raise InvalidInputError(f"sample rows must have {k} entries")
    return Z


def sufficient_fp_condition_check(pen, sample, a: float, config: Optional[RsdConfig] = None,
                                  tol: float = 1e-9, return_details: bool = False):
    """Check phi(., p)^down_A(x) <= -a at sampled infeasible (x, p) that are
    stationary in p (phi(x, .)^down(p) >= 0).

    Returns True when the condition holds at every such sample (vacuously for
    an empty sample).
    """
    if a <= 0:
        raise InvalidInputError("a must be positive")
    problem = pen.problem
    d = problem.dim
    if sample is None or len(sample) == 0:
        return (True, []) if return_details else True
    base = config or SCAN_CONFIG
    Z = _as_rows(sample, d + 1, True)
    x, p = Z[:, :d], Z[:, d]
    keep = ~_point_is_p0_feasible(pen, x, p)
    phi = pen.phi(x, p)
    keep &= np.isfinite(phi)
    failures = []
    for i in np.flatnonzero(keep):
        xi, pi = x[i], p[i]
        est_p = estimate_rsd(lambda P: pen.phi(np.broadcast_to(xi, P.shape[:-1] + (d,)), np.maximum(P[..., 0], 0.0)),
                             lambda P: P[..., 0] >= 0, np.array([pi]), base)
        if est_p.value < -tol:
            continue
        est_x = estimate_rsd(lambda X: pen.phi(X, pi), problem.box.contains, xi, base)
        if not est_x.value <= -a + tol:
            failures.append((xi.copy(), float(pi), est_x.value))
    ok = not failures
    return (ok, failures) if return_details else ok


def approximate_fermat_probe(g: Callable, set_membership: Optional[Callable], x_eps, eps: float, r: float,
                             config: Optional[RsdConfig] = None, max_iter: int = 20_000):
    """Search for y with g(y) <= g(x_eps), |y - x_eps| <= r and sampled RSD >= -eps/r.

    Minimizes the perturbed function ``g(y) + (eps/r) |y - x_eps|`` over the set
    by a pattern search started at ``x_eps``; any decrease of that function
    keeps ``g(y) <= g(x_eps)`` and, when ``g(x_eps) <= inf g + eps``, also
    ``|y - x_eps| <= r``.

    Returns
    -------
    y : ndarray
    rsd : float
        Sampled RSD of ``g`` on the set at ``y``.
    """
    if eps < 0 or r <= 0:
        raise InvalidInputError("need eps >= 0 and r > 0")
    member = set_membership or _everywhere
    x0 = np.atleast_1d(np.asarray(x_eps, dtype=float))
    k = x0.size
    weight = eps / r

    def h(Y):
        return np.asarray(g(Y), dtype=float) + weight * euclidean(Y - x0)

    rng = np.random.default_rng((config.seed if config else 0) + 7919)
    dirs = np.vstack([np.eye(k), -np.eye(k), rng.standard_normal((max(16, 4 * k), k))])
    dirs /= euclidean(dirs)[:, None]
    y, hy = x0.copy(), float(h(x0[None, :])[0])
    step = r / 2.0
    it = 0
    while step > 1e-13 * max(1.0, r) and it < max_iter:
        it += 1
        cand = y + step * dirs
        ok = np.asarray(member(cand), dtype=bool) & (euclidean(cand - x0) <= r)
        if np.any(ok):
            vals = np.where(ok, h(cand), np.inf)
            j = int(np.argmin(vals))
            if vals[j] < hy:
                y, hy = cand[j], float(vals[j])
                continue
        step /= 2.0
    est = estimate_rsd(g, member, y, config)
    return y, est.value
