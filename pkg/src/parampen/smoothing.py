"""Smoothing approximations of nonsmooth penalty terms.

Two families are provided:

* exponential smoothing of the l1 term, built from
  ``theta(t, p) = p/2 exp(t/p)`` for ``t <= 0`` and ``t + p/2 exp(-t/p)`` for
  ``t > 0`` (``theta(t, 0) = max(0, t)``), with equality constraints split
  into the two inequalities ``a <= 0`` and ``-a <= 0``;
* log-sum-exp smoothing of the l-infinity term ``max{0, g_1, ..., g_k}``.

Both are upper approximations (``Phi >= phi``), so adding a weight ``omega(p)``
gives a parametric penalty whose infimum over ``p`` is the original term.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidInputError
from .penalty import ParameterSpace, ParametricPenalty, l1_term, linf_term
from .problem import Problem
from .singular import ScalarGrowthFunction, identity_growth


def exp_theta(t, p):
    """Exponential smoothing of max(0, t); exact piecewise formula."""
    t = np.asarray(t, dtype=float)
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise InvalidInputError("p must be nonnegative")
    pos = p > 0
    ps = np.where(pos, p, 1.0)
    # exponent is always <= 0, so no overflow
    e = np.exp(-np.abs(t) / ps)
    smooth = np.where(t <= 0, 0.5 * ps * e, t + 0.5 * ps * e)
    out = np.where(pos, smooth, np.maximum(0.0, t))
    return float(out) if out.ndim == 0 else out


def _split_components(problem: Problem, x) -> np.ndarray:
    """Constraint values with equalities doubled as (a, -a), shape (..., 2m + l)."""
    c = problem.constraint_values(x)
    m = problem.constraints.m
    return np.concatenate([c[..., :m], -c[..., :m], c[..., m:]], axis=-1)


def exp_smoothed_l1(problem: Problem, x, p):
    """sum of theta over the split constraint components."""
    g = _split_components(problem, x)
    p = np.asarray(p, dtype=float)
    out = np.sum(exp_theta(g, p[..., None]), axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def stable_logsumexp(z: np.ndarray, axis: int = -1) -> np.ndarray:
    """log(sum(exp(z))) along ``axis`` with max subtraction."""
    z = np.asarray(z, dtype=float)
    zmax = np.max(z, axis=axis, keepdims=True)
    zmax = np.where(np.isfinite(zmax), zmax, 0.0)
    s = np.sum(np.exp(z - zmax), axis=axis)
    return np.log(s) + np.squeeze(zmax, axis=axis)


def logsumexp_term(problem: Problem, x, p, include_zero: bool = True):
    """p ln(sum_k exp(g_k(x)/p)) over {0, g_1, ...} (the 0 summand optional).

    At ``p = 0`` this returns the maximum of the summands.  Equalities enter
    as the pair ``(a, -a)``.
    """
    g = _split_components(problem, x)
    if include_zero:
        g = np.concatenate([np.zeros(g.shape[:-1] + (1,)), g], axis=-1)
    p = np.asarray(p, dtype=float)
    if np.any(p < 0):
        raise InvalidInputError("p must be nonnegative")
    pos = p > 0
    ps = np.where(pos, p, 1.0)
    smooth = ps * stable_logsumexp(g / ps[..., None])
    out = np.where(pos, smooth, np.max(g, axis=-1))
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class SmoothingApprox:
    """A family Phi(x, p) approximating a nonsmooth term phi(x) = Phi(x, 0).

    Attributes
    ----------
    base_term : callable
        ``phi(X)``.
    family : callable
        ``Phi(X, P)``.
    error_bound : callable
        ``e_bound(p)`` with ``sup_x |Phi(x, p) - phi(x)| <= e_bound(p)``.
    is_upper : bool
        Whether ``Phi >= phi`` everywhere.
    summands : int
        Number of smoothed summands (``m_eff`` for exponential smoothing).
    """

    name: str
    problem: Problem
    base_term: Callable
    family: Callable
    error_bound: Callable
    is_upper: bool
    summands: int


def exp_smoothing(problem: Problem) -> SmoothingApprox:
    m_eff = 2 * problem.constraints.m + problem.constraints.l
    return SmoothingApprox(
        name="exp",
        problem=problem,
        base_term=lambda X: l1_term(problem, X),
        family=lambda X, P: exp_smoothed_l1(problem, X, P),
        error_bound=lambda p: m_eff * np.asarray(p, dtype=float) / 2.0,
        is_upper=True,
        summands=m_eff,
    )


def logsumexp_smoothing(problem: Problem, include_zero: bool = True) -> SmoothingApprox:
    k = 2 * problem.constraints.m + problem.constraints.l + (1 if include_zero else 0)
    if include_zero:
        base = lambda X: linf_term(problem, X)  # noqa: E731
    else:
        base = lambda X: np.max(_split_components(problem, X), axis=-1)  # noqa: E731
    return SmoothingApprox(
        name="logsumexp",
        problem=problem,
        base_term=base,
        family=lambda X, P: logsumexp_term(problem, X, P, include_zero),
        error_bound=lambda p: np.asarray(p, dtype=float) * np.log(k),
        is_upper=True,
        summands=k,
    )


SMOOTHING_FAMILIES = {"exp": exp_smoothing, "logsumexp": logsumexp_smoothing}


@dataclass
class OmegaWeight:
    """omega applied to d(p, p0) = p."""

    omega: ScalarGrowthFunction

    def __call__(self, p):
        return self.omega(p)


def make_parametric(approx: SmoothingApprox, weight: Optional[OmegaWeight] = None,
                    problem: Optional[Problem] = None) -> ParametricPenalty:
    """phi(x, p) = Phi(x, p) + omega(p).

    For upper approximations the infimum over p is attained at p = 0 and equals
    the base term, which is used directly as the exact ``inf_phi``.
    """
    weight = OmegaWeight(identity_growth()) if weight is None else weight
    problem = approx.problem if problem is None else problem

    def term(X, P):
        P = np.asarray(P, dtype=float)
        return approx.family(X, P) + weight(P)

    inf_term = None
    if approx.is_upper:

        def inf_term(X):
            v = np.asarray(approx.base_term(X), dtype=float)
            return v, np.zeros_like(v)

    return ParametricPenalty(
        problem, term, ParameterSpace.HALF_LINE, name=f"smooth:{approx.name}",
        inf_term=inf_term, omega_lower=weight.omega, p_scale=1.0, config=approx,
    )


def empirical_error_sup(approx: SmoothingApprox, sample, p: float) -> float:
    """max over the sample of |Phi(x, p) - phi(x)|."""
    X = np.asarray(sample, dtype=float)
    if X.size == 0:
        raise InvalidInputError("sample must be nonempty")
    X = approx.problem._check(X)
    if X.ndim == 1:
        X = X[None, :]
    diff = np.abs(approx.family(X, np.full(X.shape[:-1], float(p))) - approx.base_term(X))
    return float(np.max(diff))


def inf_gap_certificate(approx: SmoothingApprox, problem: Problem, lam: float, p: float,
                        oracle_inf_g: float, oracle_inf_F: float, slack: float = 1e-9) -> bool:
    """|inf_x F_lambda(x, p) - inf_x g_lambda(x)| <= lambda e_bound(p) + slack."""
    if lam < 0 or p < 0:
        raise InvalidInputError("lambda and p must be nonnegative")
    return bool(abs(oracle_inf_F - oracle_inf_g) <= lam * float(approx.error_bound(p)) + slack)


def smoothed_objective(approx: SmoothingApprox, lam: float, p: float) -> Callable:
    """x -> f(x) + lam Phi(x, p)."""
    problem = approx.problem

    def F(X):
        return problem.f(X) + lam * approx.family(X, np.full(np.shape(X)[:-1], float(p)))

    return F


def base_objective(approx: SmoothingApprox, lam: float) -> Callable:
    """x -> g_lambda(x) = f(x) + lam phi(x)."""
    problem = approx.problem
    return lambda X: problem.f(X) + lam * approx.base_term(X)
