"""Constrained problem model: objective, constraint system, box, residual distances.

All problem callables follow one convention: a point (or a batch of points)
is an array whose last axis holds the coordinates, and the callable returns
an array with that last axis removed.  Registry problems and problems parsed
from text obey this automatically; plain Python callables written for a
single point can be wrapped with ``vectorized=False``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidInputError

ScalarFunction = Callable[[np.ndarray], np.ndarray]


class Norm(enum.Enum):
    L1 = "L1"
    L2 = "L2"
    LINF = "LINF"

    @classmethod
    def parse(cls, value: "Norm | str") -> "Norm":
        if isinstance(value, Norm):
            return value
        key = str(value).strip().upper().replace("-", "")
        aliases = {"1": "L1", "2": "L2", "INF": "LINF", "MAX": "LINF"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise InvalidInputError(f"unknown norm {value!r}") from None

    def __call__(self, v: np.ndarray) -> np.ndarray:
        """Norm of ``v`` along its last axis."""
        v = np.asarray(v, dtype=float)
        if v.shape[-1] == 0:
            return np.zeros(v.shape[:-1])
        if self is Norm.L1:
            return np.sum(np.abs(v), axis=-1)
        if self is Norm.L2:
            return np.sqrt(np.sum(v * v, axis=-1))
        return np.max(np.abs(v), axis=-1)


def _pointwise(func: Callable, d: int) -> ScalarFunction:
    """Lift a single-point callable to the batched convention."""

    def lifted(x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, d)
        out = np.array([float(func(row)) for row in flat])
        return out.reshape(x.shape[:-1])

    return lifted


@dataclass(frozen=True)
class BoxSet:
    """Componentwise bounds ``lower <= x <= upper`` (entries may be infinite)."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise InvalidInputError("box bounds must be 1-d arrays of equal length")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo > hi):
            raise InvalidInputError("box requires lower[i] <= upper[i]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def from_bounds(cls, bounds: Sequence[tuple[float, float]]) -> "BoxSet":
        lo, hi = zip(*bounds)
        return cls(np.array(lo, dtype=float), np.array(hi, dtype=float))

    @classmethod
    def unbounded(cls, d: int) -> "BoxSet":
        return cls(np.full(d, -np.inf), np.full(d, np.inf))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def is_bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))

    def contains(self, x, tol: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lower - tol) & (x <= self.upper + tol), axis=-1)

    def project(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def finite_bounds(self, span: float = 10.0, center=None) -> tuple[np.ndarray, np.ndarray]:
        """Finite surrogate bounds used for sampling and grids.

        Infinite sides are replaced by ``center +/- span`` (``center`` defaults
        to the finite opposite bound or the origin).
        """
        lo, hi = self.lower.copy(), self.upper.copy()
        c = np.zeros(self.dim) if center is None else np.asarray(center, dtype=float)
        for i in range(self.dim):
            if not np.isfinite(lo[i]) and not np.isfinite(hi[i]):
                lo[i], hi[i] = c[i] - span, c[i] + span
            elif not np.isfinite(lo[i]):
                lo[i] = min(hi[i], c[i]) - span
            elif not np.isfinite(hi[i]):
                hi[i] = max(lo[i], c[i]) + span
        return lo, hi

    def sample(self, rng: np.random.Generator, n: int, span: float = 10.0) -> np.ndarray:
        lo, hi = self.finite_bounds(span)
        return rng.uniform(lo, hi, size=(n, self.dim))


@dataclass
class ConstraintSystem:
    """Equalities ``a_i(x) = 0`` and inequalities ``b_j(x) <= 0``."""

    equalities: list = field(default_factory=list)
    inequalities: list = field(default_factory=list)
    norm: Norm = Norm.L2

    def __post_init__(self):
        self.equalities = list(self.equalities)
        self.inequalities = list(self.inequalities)
        self.norm = Norm.parse(self.norm)
        if not self.equalities and not self.inequalities:
            raise InvalidInputError("a constraint system needs at least one constraint")

    @property
    def m(self) -> int:
        return len(self.equalities)

    @property
    def l(self) -> int:  # noqa: E743
        return len(self.inequalities)

    @property
    def size(self) -> int:
        return self.m + self.l


class Problem:
    """min f(x) s.t. a_i(x) = 0, b_j(x) <= 0, x in box.

    Parameters
    ----------
    objective : callable
        Batched objective (see module docstring).
    constraints : ConstraintSystem
    box : BoxSet
    known_fstar : float, optional
        Optimal value, when known.
    known_minimizers : sequence of array_like, optional
    name : str
    vectorized : bool
        If False, all callables are treated as single-point functions and lifted.
    source : dict, optional
        Expression sources (``f``, ``eq``, ``ineq``) for problems that can be
        written back to the text format.
    """

    def __init__(
        self,
        objective: ScalarFunction,
        constraints: ConstraintSystem,
        box: BoxSet,
        known_fstar: Optional[float] = None,
        known_minimizers: Optional[Sequence] = None,
        name: str = "problem",
        vectorized: bool = True,
        source: Optional[dict] = None,
    ):
        self.box = box
        self.dim = box.dim
        if not vectorized:
            objective = _pointwise(objective, self.dim)
            constraints = ConstraintSystem(
                [_pointwise(a, self.dim) for a in constraints.equalities],
                [_pointwise(b, self.dim) for b in constraints.inequalities],
                constraints.norm,
            )
        self.objective = objective
        self.constraints = constraints
        self.known_fstar = None if known_fstar is None else float(known_fstar)
        self.known_minimizers = [
            np.atleast_1d(np.asarray(x, dtype=float)) for x in (known_minimizers or [])
        ]
        self.name = name
        self.source = source

    def __repr__(self):
        return f"Problem({self.name!r}, d={self.dim}, m={self.constraints.m}, l={self.constraints.l})"

    @property
    def norm(self) -> Norm:
        return self.constraints.norm

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            x = x.reshape(1)
        if x.shape[-1] != self.dim:
            raise InvalidInputError(f"point has dimension {x.shape[-1]}, problem has {self.dim}")
        return x

    def f(self, x) -> np.ndarray:
        x = self._check(x)
        return np.asarray(self.objective(x), dtype=float) * np.ones(x.shape[:-1])

    def constraint_values(self, x) -> np.ndarray:
        """Raw values ``(a_1..a_m, b_1..b_l)`` stacked on the last axis."""
        x = self._check(x)
        funcs = self.constraints.equalities + self.constraints.inequalities
        cols = [np.asarray(g(x), dtype=float) * np.ones(x.shape[:-1]) for g in funcs]
        return np.stack(cols, axis=-1)

    def equality_values(self, x) -> np.ndarray:
        return self.constraint_values(x)[..., : self.constraints.m]

    def inequality_values(self, x) -> np.ndarray:
        return self.constraint_values(x)[..., self.constraints.m :]


def shifted_residual(problem: Problem, x, p=0.0, w=None) -> np.ndarray:
    """Residual vector of the shifted system ``0 in G(x) - p w``.

    Equalities give ``a_i(x) - p w_i``; inequalities give
    ``max(0, b_j(x) - p w_{m+j})``.
    """
    c = problem.constraint_values(x)
    m = problem.constraints.m
    p = np.asarray(p, dtype=float)
    if w is None:
        shift = 0.0
    else:
        w = np.atleast_1d(np.asarray(w, dtype=float))
        if w.shape != (problem.constraints.size,):
            raise InvalidInputError(
                f"shift vector has length {w.size}, expected {problem.constraints.size}"
            )
        shift = p[..., None] * w
    v = c - shift
    v[..., m:] = np.maximum(0.0, v[..., m:])
    return v


def residual_distance(problem: Problem, x, p=0.0, w=None, norm=None) -> np.ndarray:
    """d(0, G(x) - p w) in the configured norm (batched over leading axes of ``x``)."""
    if np.any(np.asarray(p) < 0):
        raise InvalidInputError("shift parameter p must be nonnegative")
    norm = problem.norm if norm is None else Norm.parse(norm)
    out = norm(shifted_residual(problem, x, p, w))
    return out if out.ndim else float(out)


def is_feasible(problem: Problem, x, tol: float = 0.0) -> np.ndarray:
    """Membership in the feasible set (box plus constraints within ``tol``)."""
    if tol < 0:
        raise InvalidInputError("tol must be nonnegative")
    x = problem._check(x)
    ok = problem.box.contains(x) & (np.asarray(residual_distance(problem, x)) <= tol)
    return ok if ok.ndim else bool(ok)


def project_to_box(box: BoxSet, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (box.dim,) and not (x.ndim == 0 and box.dim == 1):
        raise InvalidInputError("point and box dimensions differ")
    return box.project(x)
