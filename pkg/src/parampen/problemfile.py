"""Problem file format.

A problem file is a list of ``key = value`` statements separated by newlines
or semicolons; ``#`` starts a comment.  Keys::

    name   = identifier
    d      = dimension (optional when it can be inferred from the expressions)
    box    = [lo, hi]                  same bounds for every coordinate
           | [[lo1, hi1], [lo2, hi2]]  per coordinate (inf / -inf allowed)
    f      = expression
    eq     = [expr, expr, ...]         equality constraints a_i(x) = 0
    ineq   = [expr, ...]               inequality constraints b_j(x) <= 0
    norm   = L1 | L2 | LINF
    fstar  = number                    known optimal value
    xstar  = [[...], ...]              known minimizers

Example: ``d=1; box=[0,2]; f=x1; eq=[x1-1]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ExpressionSyntaxError, InvalidInputError
from .expr import Node, compile_expression, max_variable, parse_expression, to_text
from .problem import BoxSet, ConstraintSystem, Norm, Problem

KEYS = ("name", "d", "box", "f", "eq", "ineq", "norm", "fstar", "xstar")


@dataclass(frozen=True)
class ProblemSource:
    """Structural description of an expression-defined problem."""

    dim: int
    lower: tuple
    upper: tuple
    objective: Node
    equalities: tuple = ()
    inequalities: tuple = ()
    norm: str = "L2"
    name: str = "problem"
    fstar: Optional[float] = None
    minimizers: tuple = field(default=())

    def build(self) -> Problem:
        cons = ConstraintSystem(
            [compile_expression(e) for e in self.equalities],
            [compile_expression(e) for e in self.inequalities],
            Norm.parse(self.norm),
        )
        return Problem(
            compile_expression(self.objective),
            cons,
            BoxSet(np.array(self.lower, dtype=float), np.array(self.upper, dtype=float)),
            known_fstar=self.fstar,
            known_minimizers=[np.array(m) for m in self.minimizers],
            name=self.name,
            source=self,
        )


# ------------------------------------------------------------ low-level splitting


def _statements(text: str):
    """Yield (key, value, line, value_column) for every statement."""
    for lineno, raw in enumerate(text.splitlines() or [""], start=1):
        line = raw.split("#", 1)[0]
        start = 0
        depth = 0
        pieces = []
        for i, ch in enumerate(line):
            if ch in "([":
                depth += 1
            elif ch in ")]":
                depth -= 1
            elif ch == ";" and depth == 0:
                pieces.append((start, line[start:i]))
                start = i + 1
        pieces.append((start, line[start:]))
        for offset, piece in pieces:
            if not piece.strip():
                continue
            if "=" not in piece:
                col = offset + len(piece) - len(piece.lstrip()) + 1
                raise ExpressionSyntaxError("expected 'key = value'", lineno, col)
            eq = piece.index("=")
            key = piece[:eq].strip()
            value = piece[eq + 1 :]
            vcol = offset + eq + 2 + (len(value) - len(value.lstrip()))
            yield key, value.strip(), lineno, vcol, offset + 1


def _split_list(value: str, line: int, col: int):
    """Split ``[a, b, ...]`` at top-level commas; returns [(item, column), ...]."""
    if not (value.startswith("[") and value.endswith("]")):
        raise ExpressionSyntaxError("expected a bracketed list", line, col)
    inner = value[1:-1]
    items = []
    depth = 0
    start = 0
    for i, ch in enumerate(inner):
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        elif ch == "," and depth == 0:
            items.append((inner[start:i], start))
            start = i + 1
    items.append((inner[start:], start))
    out = []
    for item, off in items:
        stripped = item.strip()
        if not stripped:
            if len(items) == 1:
                return []
            raise ExpressionSyntaxError("empty list item", line, col + 1 + off)
        out.append((stripped, col + 1 + off + (len(item) - len(item.lstrip()))))
    return out


def _number(text: str, line: int, col: int) -> float:
    t = text.strip().lower()
    table = {"inf": math.inf, "+inf": math.inf, "-inf": -math.inf}
    if t in table:
        return table[t]
    try:
        return float(t)
    except ValueError:
        raise ExpressionSyntaxError(f"expected a number, found {text!r}", line, col) from None


# ------------------------------------------------------------ parse / format


def parse_problem_source(text: str) -> ProblemSource:
    seen = {}
    for key, value, line, vcol, kcol in _statements(text):
        if key not in KEYS:
            raise ExpressionSyntaxError(f"unknown key {key!r}", line, kcol)
        if key in seen:
            raise ExpressionSyntaxError(f"duplicate key {key!r}", line, kcol)
        seen[key] = (value, line, vcol)
    if "f" not in seen:
        raise ExpressionSyntaxError("missing objective 'f'", 1, 1)

    dim = None
    if "d" in seen:
        value, line, col = seen["d"]
        try:
            dim = int(value)
        except ValueError:
            raise ExpressionSyntaxError("d must be a positive integer", line, col) from None
        if dim < 1:
            raise ExpressionSyntaxError("d must be a positive integer", line, col)

    def expr(value, line, col):
        if not value:
            raise ExpressionSyntaxError("expected an expression: unexpected end of input", line, col)
        return parse_expression(value, dim, line, col)

    objective = expr(*seen["f"])
    eqs, ineqs = [], []
    for key, bucket in (("eq", eqs), ("ineq", ineqs)):
        if key in seen:
            value, line, col = seen[key]
            bucket.extend(expr(item, line, c) for item, c in _split_list(value, line, col))
    if not eqs and not ineqs:
        raise InvalidInputError("a problem needs at least one constraint (eq or ineq)")

    used = max(max_variable(n) for n in [objective, *eqs, *ineqs])
    if dim is None:
        dim = max(used, 1)

    lower, upper = [-math.inf] * dim, [math.inf] * dim
    if "box" in seen:
        value, line, col = seen["box"]
        items = _split_list(value, line, col)
        if items and items[0][0].startswith("["):
            if len(items) != dim:
                raise InvalidInputError(f"box lists {len(items)} intervals for dimension {dim}")
            for i, (item, c) in enumerate(items):
                pair = _split_list(item, line, c)
                if len(pair) != 2:
                    raise ExpressionSyntaxError("interval needs two bounds", line, c)
                lower[i], upper[i] = (_number(t, line, cc) for t, cc in pair)
        else:
            if len(items) != 2:
                raise ExpressionSyntaxError("box needs [lo, hi] or a list of intervals", line, col)
            lo, hi = (_number(t, line, c) for t, c in items)
            lower, upper = [lo] * dim, [hi] * dim

    norm = "L2"
    if "norm" in seen:
        value, line, col = seen["norm"]
        try:
            norm = Norm.parse(value).value
        except InvalidInputError:
            raise ExpressionSyntaxError(f"unknown norm {value!r}", line, col) from None

    fstar = None
    if "fstar" in seen:
        fstar = _number(*seen["fstar"])
    minimizers = ()
    if "xstar" in seen:
        value, line, col = seen["xstar"]
        pts = []
        for item, c in _split_list(value, line, col):
            coords = tuple(_number(t, line, cc) for t, cc in _split_list(item, line, c))
            if len(coords) != dim:
                raise InvalidInputError(f"minimizer has dimension {len(coords)}, expected {dim}")
            pts.append(coords)
        minimizers = tuple(pts)

    name = seen["name"][0] if "name" in seen else "problem"
    return ProblemSource(dim, tuple(lower), tuple(upper), objective, tuple(eqs), tuple(ineqs),
                         norm, name, fstar, minimizers)


def parse_problem_file(text: str) -> Problem:
    """Parse problem-file text into a :class:`Problem` (``problem.source`` keeps the AST)."""
    return parse_problem_source(text).build()


def _fmt(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(float(v))


def format_problem(source) -> str:
    """Canonical text of a problem (accepts a ``ProblemSource`` or a parsed ``Problem``)."""
    if isinstance(source, Problem):
        if not isinstance(source.source, ProblemSource):
            raise InvalidInputError(f"problem {source.name!r} has no expression source")
        source = source.source
    lines = [
        f"name = {source.name}",
        f"d = {source.dim}",
        "box = [" + ", ".join(f"[{_fmt(l)}, {_fmt(h)}]" for l, h in zip(source.lower, source.upper)) + "]",
        f"norm = {source.norm}",
        f"f = {to_text(source.objective)}",
    ]
    if source.equalities:
        lines.append("eq = [" + ", ".join(to_text(e) for e in source.equalities) + "]")
    if source.inequalities:
        lines.append("ineq = [" + ", ".join(to_text(e) for e in source.inequalities) + "]")
    if source.fstar is not None:
        lines.append(f"fstar = {_fmt(source.fstar)}")
    if source.minimizers:
        pts = ", ".join("[" + ", ".join(_fmt(c) for c in m) + "]" for m in source.minimizers)
        lines.append(f"xstar = [{pts}]")
    return "\n".join(lines) + "\n"
