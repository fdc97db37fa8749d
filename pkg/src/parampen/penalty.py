"""Parametric penalty functions F_lambda(x, p) = f(x) + lambda * phi(x, p).

The parameter space is either ``R_+`` with distinguished point ``p0 = 0``
(singular and smoothing terms) or the one-point space, which is how the
classical non-parametric terms (l1, l-infinity, distance, quadratic) are
wrapped.  Infinite penalty values are represented by ``np.inf``; with
``lambda = 0`` the penalty part is dropped entirely, so ``F_0 = f`` even where
``phi = +inf``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidInputError
from .problem import Problem, residual_distance


class ParameterSpace(enum.Enum):
    """``HALF_LINE`` is P = [0, inf) with p0 = 0; ``POINT`` is the one-point space."""

    HALF_LINE = "half-line"
    POINT = "point"


@dataclass(frozen=True)
class PenaltyValue:
    f_part: float
    phi_part: float

    def total(self, lam: float) -> float:
        if lam < 0:
            raise InvalidInputError("lambda must be nonnegative")
        if lam == 0:
            return self.f_part
        if np.isinf(self.phi_part):
            return np.inf
        return self.f_part + lam * self.phi_part


@dataclass
class ParametricPenalty:
    """Penalty term attached to a problem.

    Parameters
    ----------
    problem : Problem
    term : callable
        ``term(X, P)`` returning phi for points ``X`` (coordinates on the last
        axis) and parameters ``P`` broadcastable against ``X.shape[:-1]``.
    parameter_space : ParameterSpace
    name : str
        Descriptor used in reports (e.g. ``"singular:linear,w=0"``).
    inf_term : callable, optional
        ``inf_term(X) -> (values, argmin_p)`` computing ``inf_p phi(x, p)``.
        When absent, :meth:`inf_phi` falls back to a numerical search in p.
    omega_lower : callable, optional
        A function with ``phi(x, p) >= omega_lower(p)``; used by sequence
        diagnostics to conclude ``p -> p0`` from ``phi -> 0``.
    p_scale : float
        Typical parameter magnitude (upper end of multistart p samples).
    config : object, optional
        The configuration the term was built from (e.g. a ``SingularConfig``).
    """

    problem: Problem
    term: Callable
    parameter_space: ParameterSpace = ParameterSpace.HALF_LINE
    name: str = "penalty"
    inf_term: Optional[Callable] = None
    omega_lower: Optional[Callable] = None
    p_scale: float = 1.0
    config: Optional[object] = None

    @property
    def parametric(self) -> bool:
        return self.parameter_space is ParameterSpace.HALF_LINE

    def phi(self, x, p=0.0) -> np.ndarray:
        X = self.problem._check(x)
        P = np.asarray(p, dtype=float)
        if np.any(P < 0):
            raise InvalidInputError("penalty parameter must be nonnegative")
        if not self.parametric:
            P = np.zeros(X.shape[:-1])
        out = np.asarray(self.term(X, P), dtype=float)
        return np.broadcast_to(out, np.broadcast_shapes(X.shape[:-1], P.shape)).copy()

    def value(self, x, p=0.0) -> PenaltyValue:
        return PenaltyValue(float(self.problem.f(x)), float(self.phi(x, p)))

    def F(self, x, p=0.0, lam=1.0) -> np.ndarray:
        """Vectorized F_lambda with the extended-real conventions above."""
        if lam < 0:
            raise InvalidInputError("lambda must be nonnegative")
        f = self.problem.f(x)
        if lam == 0:
            return np.broadcast_to(f, np.broadcast_shapes(f.shape, np.shape(p))).copy()
        phi = self.phi(x, p)
        with np.errstate(invalid="ignore"):
            out = f + lam * phi
        return np.where(np.isinf(phi), np.inf, out)

    def inf_phi(self, x) -> tuple[np.ndarray, np.ndarray]:
        """``inf_p phi(x, p)`` and a minimizing parameter, batched over ``x``."""
        X = self.problem._check(x)
        if not self.parametric:
            return self.phi(X), np.zeros(X.shape[:-1])
        if self.inf_term is not None:
            return self.inf_term(X)
        from .oracle import minimize_over_p

        return minimize_over_p(lambda Xb, Pb: self.term(Xb, Pb), X, p_max=max(10.0, 10 * self.p_scale))


def eval_F(pen: ParametricPenalty, x, p=0.0, lam: float = 1.0):
    """F_lambda(x, p); scalar for a single point."""
    out = pen.F(x, p, lam)
    return float(out) if np.ndim(out) == 0 else out


def _scalar(out):
    return float(out) if np.ndim(out) == 0 else out


def l1_term(problem: Problem, x) -> np.ndarray:
    """sum |a_i(x)| + sum max(0, b_j(x)) (the box is not included)."""
    c = problem.constraint_values(x)
    m = problem.constraints.m
    return _scalar(np.sum(np.abs(c[..., :m]), axis=-1) + np.sum(np.maximum(0.0, c[..., m:]), axis=-1))


def linf_term(problem: Problem, x) -> np.ndarray:
    """max{0, |a_i(x)|, b_j(x)}."""
    c = problem.constraint_values(x)
    m = problem.constraints.m
    parts = np.concatenate([np.abs(c[..., :m]), c[..., m:]], axis=-1)
    return _scalar(np.maximum(0.0, np.max(parts, axis=-1)))


def in_omega_delta(pen: ParametricPenalty, x, p, delta: float):
    """Membership in Omega_delta = {(x, p) : phi(x, p) < delta}."""
    if delta <= 0:
        raise InvalidInputError("delta must be positive")
    return _scalar(pen.phi(x, p) < delta)


def barrier_transform(t, delta: float):
    """psi_delta(t) = t / (delta - t) on [0, delta), +inf beyond."""
    if delta <= 0:
        raise InvalidInputError("delta must be positive")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(np.isnan(t)):
        raise InvalidInputError("barrier transform needs t >= 0")
    inside = t < delta
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(inside, t / np.where(inside, delta - t, 1.0), np.inf)
    return _scalar(out)


def classical_penalty(problem: Problem, kind: str = "l1") -> ParametricPenalty:
    """Wrap a non-parametric term as a penalty over the one-point space.

    ``kind`` is one of ``l1``, ``linf``, ``distance`` (the residual distance in
    the problem's norm) or ``quadratic`` (squared residual distance).
    """
    kinds = {
        "l1": lambda X, P: l1_term(problem, X),
        "linf": lambda X, P: linf_term(problem, X),
        "distance": lambda X, P: residual_distance(problem, X),
        "quadratic": lambda X, P: np.asarray(residual_distance(problem, X)) ** 2,
    }
    if kind not in kinds:
        raise InvalidInputError(f"unknown classical penalty {kind!r}")
    return ParametricPenalty(problem, kinds[kind], ParameterSpace.POINT, name=kind)


def barrier_penalty(pen: ParametricPenalty, delta: float) -> ParametricPenalty:
    """The transformed term psi_delta(phi(x, p)), exact on all of A x P when
    the original penalty is exact on Omega_delta."""

    def term(X, P):
        phi = pen.term(X, P)
        inside = phi < delta
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(inside, phi / np.where(inside, delta - phi, 1.0), np.inf)

    return ParametricPenalty(
        pen.problem, term, pen.parameter_space, name=f"barrier({pen.name},delta={delta:g})",
        p_scale=pen.p_scale,
    )


__all__ = [
    "ParameterSpace",
    "PenaltyValue",
    "ParametricPenalty",
    "eval_F",
    "l1_term",
    "linf_term",
    "in_omega_delta",
    "barrier_transform",
    "classical_penalty",
    "barrier_penalty",
]
