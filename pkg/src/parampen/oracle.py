"""Brute-force reference computations: golden-section search in the penalty
parameter and zoomed grid minimization over small boxes.

These routines are the "oracles" the diagnostics and tests compare against.
They are deliberately simple (dense evaluation plus local zoom) and are meant
for dimension <= 3.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidInputError

INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0  # 1/golden ratio


def _clean(v):
    v = np.asarray(v, dtype=float)
    return np.where(np.isnan(v), np.inf, v)


def golden_section(fun: Callable, a, b, rtol: float = 1e-10, atol: float = 0.0, max_iter: int = 300):
    """Vectorized golden-section minimization on the brackets ``[a, b]``.

    ``fun`` maps an array of abscissae (one per bracket) to values.  Iteration
    stops once every bracket satisfies ``b - a <= rtol * |x| + atol``.

    Returns
    -------
    x, fx, (lo, hi)
        Best abscissae found, their values and the final brackets.
    """
    a = np.array(a, dtype=float, copy=True)
    b = np.array(b, dtype=float, copy=True)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = _clean(fun(c)), _clean(fun(d))
    for _ in range(max_iter):
        width = b - a
        if np.all(width <= rtol * np.maximum(np.abs(c), np.abs(d)) + atol):
            break
        left = fc <= fd  # minimum in [a, d]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = np.where(left, b - INV_PHI * (b - a), d)
        new_d = np.where(left, c, a + INV_PHI * (b - a))
        # reuse the surviving interior point, evaluate only the new one
        probe = np.where(left, new_c, new_d)
        fp = _clean(fun(probe))
        fc, fd = np.where(left, fp, fd), np.where(left, fc, fp)
        c, d = new_c, new_d
    x = np.where(fc <= fd, c, d)
    fx = np.minimum(fc, fd)
    return x, fx, (a, b)


def parabolic_step(fun: Callable, x, fx, lo, hi):
    """One quadratic-fit refinement through ``(lo, x, hi)``; kept only where it improves."""
    flo, fhi = _clean(fun(lo)), _clean(fun(hi))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        num = (x - lo) ** 2 * (fx - fhi) - (x - hi) ** 2 * (fx - flo)
        den = (x - lo) * (fx - fhi) - (x - hi) * (fx - flo)
        v = x - 0.5 * num / den
    ok = np.isfinite(v) & (v > lo) & (v < hi)
    v = np.where(ok, v, x)
    fv = _clean(fun(v))
    better = fv < fx
    return np.where(better, v, x), np.where(better, fv, fx)


def p_search(fun2d: Callable, lo, hi, n_grid: int = 64, rtol: float = 1e-10, zero_value=None):
    """Minimize row-wise over p in ``[lo, hi]`` (log grid, golden section, parabola).

    Parameters
    ----------
    fun2d : callable
        Maps a parameter array of shape ``(N, K)`` to values of the same shape,
        row ``i`` belonging to the ``i``-th point.
    lo, hi : array_like, shape (N,)
        Positive brackets.
    zero_value : array_like, optional
        Value at ``p = 0`` for each row; it competes with the bracket search.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.shape[0]
    t = np.linspace(0.0, 1.0, n_grid)
    P = lo[:, None] * (hi / lo)[:, None] ** t[None, :]
    V = _clean(fun2d(P))
    k = np.argmin(V, axis=1)
    rows = np.arange(n)
    a = P[rows, np.maximum(k - 1, 0)]
    b = P[rows, np.minimum(k + 1, n_grid - 1)]

    def fun1(p):
        return fun2d(p[:, None])[:, 0]

    x, fx, (ga, gb) = golden_section(fun1, a, b, rtol=rtol)
    x, fx = parabolic_step(fun1, x, fx, ga, gb)
    grid_best = V[rows, k]
    use_grid = grid_best < fx
    x = np.where(use_grid, P[rows, k], x)
    fx = np.where(use_grid, grid_best, fx)
    if zero_value is not None:
        z = _clean(zero_value)
        use_zero = z <= fx
        x = np.where(use_zero, 0.0, x)
        fx = np.where(use_zero, z, fx)
    return fx, x


def minimize_over_p(term: Callable, X, p_max: float = 10.0, p_min: float = 1e-16,
                    include_zero: bool = True, n_grid: int = 96, chunk: int = 4096):
    """Numerical ``inf_{p >= 0} term(x, p)`` for a batch of points.

    The search covers ``{0} U [p_min, p_max]``; the lower end defaults to
    1e-16 so that terms whose infimum is only approached as ``p -> 0+`` are
    resolved to well below double-precision significance of O(1) values.
    """
    X = np.asarray(X, dtype=float)
    shape = X.shape[:-1]
    flat = X.reshape(-1, X.shape[-1])
    vals = np.empty(flat.shape[0])
    args = np.empty(flat.shape[0])
    for s in range(0, flat.shape[0], chunk):
        Xc = flat[s : s + chunk]
        nc = Xc.shape[0]
        zero = term(Xc, np.zeros(nc)) if include_zero else None
        v, a = p_search(
            lambda P: term(Xc[:, None, :], P),
            np.full(nc, p_min),
            np.full(nc, p_max),
            n_grid=n_grid,
            zero_value=zero,
        )
        vals[s : s + nc], args[s : s + nc] = v, a
    return vals.reshape(shape), args.reshape(shape)


# ------------------------------------------------------------------ grids


def axis_grid(lo: float, hi: float, step: float) -> np.ndarray:
    if step <= 0:
        raise InvalidInputError("grid step must be positive")
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise InvalidInputError("grid bounds must be finite")
    n = int(round((hi - lo) / step)) + 1
    return np.linspace(lo, hi, max(n, 2))


def box_grid(lo, hi, step) -> np.ndarray:
    """Tensor grid over a finite box, shape (N, d)."""
    lo, hi = np.atleast_1d(lo), np.atleast_1d(hi)
    steps = np.broadcast_to(np.asarray(step, dtype=float), lo.shape)
    axes = [axis_grid(l, h, s) for l, h, s in zip(lo, hi, steps)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def evaluate_chunked(func: Callable, X: np.ndarray, chunk: int = 65536) -> np.ndarray:
    out = np.empty(X.shape[0])
    for s in range(0, X.shape[0], chunk):
        out[s : s + chunk] = _clean(func(X[s : s + chunk]))
    return out


@dataclass
class GridMinimum:
    value: float
    x: np.ndarray
    evaluations: int


def _distinct_best(X, V, k, min_sep):
    order = np.argsort(V, kind="stable")
    chosen = []
    for i in order:
        if not np.isfinite(V[i]):
            break
        if all(np.max(np.abs(X[i] - X[j])) > min_sep for j in chosen):
            chosen.append(i)
        if len(chosen) == k:
            break
    return chosen


def grid_minimize(func: Callable, lo, hi, step, extra_points=None, top_k: int = 5,
                  refine_rounds: int = 4, zoom_points: int = 21) -> GridMinimum:
    """Dense grid minimization with local zoom refinement.

    ``func`` maps an ``(N, d)`` array to ``(N,)`` values (``inf`` and ``nan``
    count as +inf).  After the coarse pass the ``top_k`` best well-separated
    grid points are each refined by ``refine_rounds`` local grids, each ten
    times finer than the previous one and clipped to the box.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    X = box_grid(lo, hi, step)
    if extra_points is not None and len(extra_points):
        extra = np.clip(np.atleast_2d(np.asarray(extra_points, dtype=float)), lo, hi)
        X = np.vstack([X, extra])
    V = evaluate_chunked(func, X)
    res = refine_candidates(func, X, V, lo, hi, step, top_k, refine_rounds, zoom_points)
    res.evaluations += X.shape[0]
    return res


def refine_candidates(func: Callable, X, V, lo, hi, step, top_k: int = 5, refine_rounds: int = 4,
                      zoom_points: int = 21) -> GridMinimum:
    """Zoom refinement around the ``top_k`` best well-separated rows of ``X``
    (values ``V`` already computed), keeping the overall best point."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    V = _clean(V)
    evals = 0
    best_i = int(np.argmin(V))
    best_v, best_x = V[best_i], X[best_i].copy()
    step = np.broadcast_to(np.asarray(step, dtype=float), lo.shape)
    offsets_1d = np.linspace(-1.0, 1.0, zoom_points)
    offsets = np.array(list(itertools.product(offsets_1d, repeat=lo.size)))
    for i in _distinct_best(X, V, top_k, float(np.max(step))):
        center = X[i].copy()
        cval = V[i]
        half = step.copy()
        for _ in range(refine_rounds):
            pts = np.clip(center + offsets * half, lo, hi)
            vals = evaluate_chunked(func, pts)
            evals += pts.shape[0]
            j = int(np.argmin(vals))
            if vals[j] < cval:
                center, cval = pts[j].copy(), vals[j]
            half = half / 10.0
        if cval < best_v:
            best_v, best_x = cval, center
    return GridMinimum(float(best_v), best_x, evals)


def finite_box(problem, span: float = 10.0):
    lo, hi = problem.box.finite_bounds(span)
    return lo, hi


def default_step(dim: int) -> float:
    return {1: 1e-3, 2: 1e-2}.get(dim, 5e-2)


@dataclass
class OracleInf:
    """Result of the brute-force ``inf_{A x P} F_lambda``."""

    value: float
    x: np.ndarray
    p: float
    lam: float


def reduced_objective(pen, lam: float) -> Callable:
    """x -> f(x) + lam * inf_p phi(x, p)  (just f when lam = 0)."""

    def g(X):
        f = pen.problem.f(X)
        if lam == 0:
            return f
        v, _ = pen.inf_phi(X)
        with np.errstate(invalid="ignore"):
            return np.where(np.isinf(v), np.inf, f + lam * v)

    return g


def oracle_inf_F(pen, lam: float, step: Optional[float] = None, extra_points=None,
                 span: float = 10.0) -> OracleInf:
    """Brute-force infimum of F_lambda over A x P via the reduction
    inf_{x,p} F = inf_x [f(x) + lam * inf_p phi(x, p)]."""
    problem = pen.problem
    if problem.dim > 3:
        raise InvalidInputError("grid oracles are limited to dimension <= 3")
    step = default_step(problem.dim) if step is None else step
    lo, hi = finite_box(problem, span)
    extra = list(problem.known_minimizers)
    if extra_points is not None:
        extra.extend(np.atleast_2d(extra_points))
    res = grid_minimize(reduced_objective(pen, lam), lo, hi, step, extra_points=extra or None)
    _, p = pen.inf_phi(res.x[None, :])
    return OracleInf(res.value, res.x, float(p[0]), lam)


def oracle_fstar(problem, step: Optional[float] = None, tol: float = 0.0, span: float = 10.0):
    """Grid minimum of f over feasible grid points (``None`` if none is feasible)."""
    from .problem import residual_distance

    step = default_step(problem.dim) if step is None else step
    lo, hi = finite_box(problem, span)

    def g(X):
        d = residual_distance(problem, X)
        return np.where(np.asarray(d) <= tol, problem.f(X), np.inf)

    extra = problem.known_minimizers or None
    res = grid_minimize(g, lo, hi, step, extra_points=extra, refine_rounds=0)
    return (None, None) if not np.isfinite(res.value) else (res.value, res.x)
