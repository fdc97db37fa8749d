"""Built-in problems with known optima.

Every entry is written in the problem-file language so it can be exported
and re-parsed.  Metadata: optimal value, minimizers, a Lipschitz constant
``L`` of f near the minimizer and a metric subregularity constant ``tau``
(``d(0, G(x)) >= tau * dist(x, feasible set)`` near the minimizer) when these
are known, and whether MFCQ holds at the minimizer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import LookupFailure
from .problem import Problem
from .problemfile import format_problem, parse_problem_file


@dataclass
class RegistryEntry:
    problem: Problem
    note: str
    fstar: Optional[float]
    minimizers: list
    L: Optional[float] = None
    tau: Optional[float] = None
    mfcq: Optional[bool] = None

    @property
    def name(self) -> str:
        return self.problem.name

    def export(self) -> str:
        return format_problem(self.problem)


_SOURCES = {}
_META = {}


def _register(name, text, note, L=None, tau=None, mfcq=None):
    _SOURCES[name] = f"name = {name}\n{text}"
    _META[name] = dict(note=note, L=L, tau=tau, mfcq=mfcq)


_register(
    "lianzhang-1d",
    "d = 1; box = [0, 2]; f = x1; eq = [x1 - 1]; fstar = 1; xstar = [[1]]",
    "min x s.t. x - 1 = 0 on [0, 2]; the worked counterexample for the Lian-Zhang term",
    L=1.0, tau=1.0, mfcq=True,
)
_register(
    "mfcq-nlp-2d",
    "d = 2; box = [-3, 3]; f = (x1 - 2)^2 + (x2 - 1)^2; ineq = [x1^2 - x2, x1 + x2 - 2]; "
    "fstar = 1; xstar = [[1, 1]]",
    "smooth inequality-constrained NLP; both constraints active at (1, 1), MFCQ holds",
    # L: |grad f| <= 2.2 on the ball of radius 0.1 around (1, 1); tau: sampled
    # d(0, G(x)) / dist(x, feasible set) on that ball never drops below sqrt(2).
    L=2.2, tau=1.3, mfcq=True,
)
_register(
    "noncalm-sqrt",
    "d = 1; box = [-1, 1]; f = -x1; eq = [x1^2]; fstar = 0; xstar = [[0]]",
    "d(0, G(x)) = x^2, so beta(eta) behaves like -sqrt(eta): zero duality gap without exactness",
    L=1.0, tau=None, mfcq=False,
)
_register(
    "infeasible-localmin-1d",
    "d = 1; box = [-2, 2]; f = (x1^2 - 1)^2; ineq = [0.5 - x1]; fstar = 0; xstar = [[1]]",
    "f has a local (and global) minimizer at the infeasible point x = -1",
    L=None, tau=1.0, mfcq=True,
)
_register(
    "gap-jump-halfline",
    "d = 1; box = [[0, inf]]; f = exp(-x1) - 1; eq = [x1*exp(-x1^2)]; fstar = 0; xstar = [[0]]",
    "only x = 0 is feasible but the residual vanishes again as x -> inf where f -> -1: "
    "beta jumps from -1 to 0 at the origin and the duality gap is 1",
    L=None, tau=None, mfcq=True,
)
_register(
    "nonlipschitz-1d",
    "d = 1; box = [0, 2]; f = -sqrt(abs(x1 - 1)); eq = [x1 - 1]; fstar = 0; xstar = [[1]]",
    "objective not Lipschitz at the only feasible point: no penalty of distance type is exact",
    L=None, tau=1.0, mfcq=True,
)
_register(
    "qp-2d",
    "d = 2; box = [-2, 2]; f = x1^2 + x2^2; ineq = [1 - x1 - x2, x1 - x2 - 1]; "
    "fstar = 0.5; xstar = [[0.5, 0.5]]",
    "convex QP, one active linear inequality",
    L=1.5, tau=1.4, mfcq=True,
)
_register(
    "disk-2d",
    "d = 2; box = [-2, 2]; f = (x1 - 1)^2 + (x2 - 2)^2; ineq = [x1^2 + x2^2 - 1, -x1]; "
    f"fstar = {float(6 - 2 * np.sqrt(5))!r}; xstar = [[{float(1 / np.sqrt(5))!r}, {float(2 / np.sqrt(5))!r}]]",
    "projection of (1, 2) onto the unit disk",
    L=2.6, tau=1.9, mfcq=True,
)
_register(
    "circle-eq-2d",
    "d = 2; box = [-2, 2]; f = x1 + x2; eq = [x1^2 + x2^2 - 2]; fstar = -2; xstar = [[-1, -1]]",
    "linear objective on a circle (equality constraint)",
    L=np.sqrt(2.0), tau=2.6, mfcq=True,
)
_register(
    "constant-1d",
    "d = 1; box = [0, 2]; f = 0; eq = [x1 - 1]; fstar = 0; xstar = [[1]]",
    "constant objective: every penalty is exact with threshold 0",
    L=1e-12, tau=1.0, mfcq=True,
)
_register(
    "exp-decay-halfline",
    "d = 1; box = [[0, inf]]; f = exp(-x1); eq = [x1]; fstar = 1; xstar = [[0]]",
    "unbounded box; f decreases towards infinity, so weak penalty terms let minimizers escape",
    L=1.0, tau=1.0, mfcq=True,
)
_register(
    "infeasible-1d",
    "d = 1; box = [-2, 2]; f = x1; eq = [x1^2 + 1]",
    "empty feasible set by construction (x^2 + 1 > 0)",
)


def list_problems() -> list[str]:
    """Registered names in a fixed order."""
    return list(_SOURCES)


def load(name: str) -> RegistryEntry:
    if name not in _SOURCES:
        raise LookupFailure(f"unknown problem {name!r}; known: {', '.join(_SOURCES)}")
    problem = parse_problem_file(_SOURCES[name])
    meta = _META[name]
    return RegistryEntry(
        problem=problem,
        note=meta["note"],
        fstar=problem.known_fstar,
        minimizers=list(problem.known_minimizers),
        L=meta["L"],
        tau=meta["tau"],
        mfcq=meta["mfcq"],
    )


def load_problem(name: str) -> Problem:
    return load(name).problem


def verify_entry(entry: RegistryEntry, step: Optional[float] = None, tol: Optional[float] = None) -> dict:
    """Re-check declared metadata against grid oracles.

    Returns a dict with the grid optimum and per-check booleans.  Feasibility
    of grid points uses the residual tolerance ``tol`` (default: exact feasibility in 1-D,
    two grid steps in 2-D so that curved constraints have nearby grid points).
    """
    from .oracle import default_step, oracle_fstar
    from .problem import is_feasible

    problem = entry.problem
    step = default_step(problem.dim) if step is None else step
    out = {"name": entry.name}
    for x in entry.minimizers:
        out.setdefault("minimizers_feasible", True)
        out["minimizers_feasible"] &= bool(is_feasible(problem, x, 1e-9))
        if entry.fstar is not None:
            out.setdefault("minimizer_values", True)
            out["minimizer_values"] &= abs(float(problem.f(x)) - entry.fstar) <= 1e-9
    if entry.fstar is not None:
        if tol is None:
            tol = 0.0 if problem.dim == 1 else 2.0 * step
        value, _ = oracle_fstar(problem, step, tol=tol)
        out["grid_fstar"] = value
        slack = 10.0 * step * (1.0 + abs(entry.fstar))
        out["fstar_matches"] = value is not None and value <= entry.fstar + 1e-9 and value >= entry.fstar - slack
    return out
