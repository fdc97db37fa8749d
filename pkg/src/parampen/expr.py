"""A small arithmetic expression language for objectives and constraints.

Grammar (standard precedence, ``^`` right-associative, unary minus binds
looser than ``^`` so ``-x1^2`` is ``-(x1^2)``)::

    expr    := expr ('+'|'-') expr | expr ('*'|'/') expr | expr '^' expr
             | '-' expr | '(' expr ')' | call | number | variable
    call    := name '(' expr (',' expr)* ')'
    name    := abs | max | min | exp | ln | sin | cos | sqrt
    variable:= 'x' digits        (x1 .. xd)

Evaluation is vectorized: variables read ``X[..., i-1]``.  Operations outside
their domain (``ln`` of a nonpositive value, division by zero, ``sqrt`` of a
negative value, fractional power of a negative base) raise
:class:`~parampen.errors.ExpressionDomainError`, or yield ``nan`` at the
offending entries when evaluated with ``strict=False``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import ExpressionDomainError, ExpressionSyntaxError, InvalidInputError

# ---------------------------------------------------------------- AST nodes


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Node = Union[Const, Var, Neg, BinOp, Call]

FUNCTION_ARITY = {
    "abs": (1, 1),
    "exp": (1, 1),
    "ln": (1, 1),
    "sin": (1, 1),
    "cos": (1, 1),
    "sqrt": (1, 1),
    "max": (1, None),
    "min": (1, None),
}

# ---------------------------------------------------------------- tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass
class _Token:
    kind: str  # number | name | op | eof
    text: str
    line: int
    column: int


def _tokenize(text: str, line: int = 1, column: int = 1) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character {text[pos]!r}", line, column + pos)
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, m.group(), line, column + pos))
        pos = m.end()
    tokens.append(_Token("eof", "", line, column + len(text)))
    return tokens


# ---------------------------------------------------------------- Pratt parser

# (left binding power, right binding power)
_INFIX = {"+": (10, 11), "-": (10, 11), "*": (20, 21), "/": (20, 21), "^": (41, 40)}
_PREFIX_MINUS_BP = 30


class _Parser:
    def __init__(self, tokens, dim: Optional[int]):
        self.tokens = tokens
        self.i = 0
        self.dim = dim

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        if tok.kind == "eof":
            message = f"{message}: unexpected end of input"
        raise ExpressionSyntaxError(message, tok.line, tok.column)

    def expect(self, text):
        tok = self.peek()
        if tok.kind != "op" or tok.text != text:
            self.error(f"expected {text!r}, found {tok.text!r}" if tok.kind != "eof" else f"expected {text!r}")
        return self.advance()

    def parse(self) -> Node:
        node = self.expression(0)
        tok = self.peek()
        if tok.kind != "eof":
            self.error(f"unexpected token {tok.text!r}")
        return node

    def expression(self, min_bp: int) -> Node:
        left = self.prefix()
        while True:
            tok = self.peek()
            if tok.kind != "op" or tok.text not in _INFIX:
                break
            lbp, rbp = _INFIX[tok.text]
            if lbp < min_bp:
                break
            self.advance()
            left = BinOp(tok.text, left, self.expression(rbp))
        return left

    def prefix(self) -> Node:
        tok = self.advance()
        if tok.kind == "number":
            return Const(float(tok.text))
        if tok.kind == "op" and tok.text == "-":
            return Neg(self.expression(_PREFIX_MINUS_BP))
        if tok.kind == "op" and tok.text == "(":
            node = self.expression(0)
            self.expect(")")
            return node
        if tok.kind == "name":
            return self.name(tok)
        self.i -= 1
        self.error("expected an operand" if tok.kind == "eof" else f"unexpected token {tok.text!r}", tok)

    def name(self, tok: _Token) -> Node:
        m = re.fullmatch(r"x([1-9]\d*)", tok.text)
        if m:
            index = int(m.group(1))
            if self.dim is not None and index > self.dim:
                raise ExpressionSyntaxError(
                    f"variable {tok.text} exceeds dimension {self.dim}", tok.line, tok.column
                )
            return Var(index)
        if tok.text not in FUNCTION_ARITY:
            raise ExpressionSyntaxError(f"unknown identifier {tok.text!r}", tok.line, tok.column)
        self.expect("(")
        args = [self.expression(0)]
        while self.peek().kind == "op" and self.peek().text == ",":
            self.advance()
            args.append(self.expression(0))
        self.expect(")")
        lo, hi = FUNCTION_ARITY[tok.text]
        if len(args) < lo or (hi is not None and len(args) > hi):
            raise ExpressionSyntaxError(
                f"{tok.text} takes {lo} argument(s), got {len(args)}", tok.line, tok.column
            )
        return Call(tok.text, tuple(args))


def parse_expression(text: str, dim: Optional[int] = None, line: int = 1, column: int = 1) -> Node:
    """Parse ``text`` into an AST.  ``line``/``column`` offset error positions."""
    return _Parser(_tokenize(text, line, column), dim).parse()


# ---------------------------------------------------------------- printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    if isinstance(node, Const) and (node.value < 0 or math.copysign(1.0, node.value) < 0):
        return 0
    return 5


def _format_number(v: float) -> str:
    if not math.isfinite(v):
        raise InvalidInputError(f"cannot print non-finite constant {v}")
    if v == int(v) and abs(v) < 1e16:
        return str(int(v)) if v != 0 or math.copysign(1.0, v) > 0 else "-0"
    return repr(v)


def to_text(node: Node) -> str:
    """Print an AST so that parsing the result gives back the same AST."""
    if isinstance(node, Const):
        return _format_number(node.value)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Neg):
        inner = to_text(node.operand)
        if _prec(node.operand) < 3:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_text(a) for a in node.args)})"
    p = _PREC[node.op]
    left, right = to_text(node.left), to_text(node.right)
    if node.op == "^":
        left_paren = _prec(node.left) <= p
        right_paren = _prec(node.right) < 3
    else:
        left_paren = _prec(node.left) < p
        right_paren = _prec(node.right) <= p
    if left_paren:
        left = f"({left})"
    if right_paren:
        right = f"({right})"
    sep = "^" if node.op == "^" else f" {node.op} " if p == 1 else node.op
    return f"{left}{sep}{right}"


def max_variable(node: Node) -> int:
    """Largest variable index referenced (0 if none)."""
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Neg):
        return max_variable(node.operand)
    if isinstance(node, BinOp):
        return max(max_variable(node.left), max_variable(node.right))
    if isinstance(node, Call):
        return max(max_variable(a) for a in node.args)
    return 0


# ---------------------------------------------------------------- evaluation


def _domain(strict: bool, bad: np.ndarray, out: np.ndarray, message: str, op: str) -> np.ndarray:
    if np.any(bad):
        if strict:
            raise ExpressionDomainError(message, op)
        out = np.where(bad, np.nan, out)
    return out


def compile_expression(node: Node, strict: bool = True) -> Callable[[np.ndarray], np.ndarray]:
    """Turn an AST into a vectorized callable ``X -> values``."""

    def build(n: Node):
        if isinstance(n, Const):
            v = n.value
            return lambda X: np.full(X.shape[:-1], v)
        if isinstance(n, Var):
            j = n.index - 1

            def var(X):
                if X.shape[-1] <= j:
                    raise InvalidInputError(f"x{j + 1} referenced but point has dimension {X.shape[-1]}")
                return X[..., j]

            return var
        if isinstance(n, Neg):
            f = build(n.operand)
            return lambda X: -f(X)
        if isinstance(n, BinOp):
            f, g = build(n.left), build(n.right)
            return _binary(n.op, f, g, strict)
        fs = [build(a) for a in n.args]
        return _call(n.name, fs, strict)

    return build(node)


def _binary(op, f, g, strict):
    if op == "+":
        return lambda X: f(X) + g(X)
    if op == "-":
        return lambda X: f(X) - g(X)
    if op == "*":
        return lambda X: f(X) * g(X)
    if op == "/":

        def div(X):
            a, b = f(X), g(X)
            zero = b == 0
            with np.errstate(divide="ignore", invalid="ignore"):
                out = a / np.where(zero, 1.0, b)
            return _domain(strict, zero, out, "division by zero", "/")

        return div

    def power(X):
        a, b = np.broadcast_arrays(f(X), g(X))
        fractional = b != np.round(b)
        bad = ((a < 0) & fractional) | ((a == 0) & (b < 0))
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            out = np.power(np.where(bad, 1.0, a), b)
        return _domain(strict, bad, out, "power outside its domain", "^")

    return power


def _call(name, fs, strict):
    if name == "max":
        return lambda X: np.maximum.reduce([np.broadcast_to(h(X), X.shape[:-1]) for h in fs])
    if name == "min":
        return lambda X: np.minimum.reduce([np.broadcast_to(h(X), X.shape[:-1]) for h in fs])
    (f,) = fs
    if name == "abs":
        return lambda X: np.abs(f(X))
    if name == "sin":
        return lambda X: np.sin(f(X))
    if name == "cos":
        return lambda X: np.cos(f(X))
    if name == "exp":

        def exp(X):
            with np.errstate(over="ignore"):
                return np.exp(f(X))

        return exp
    if name == "ln":

        def ln(X):
            a = f(X)
            bad = a <= 0
            return _domain(strict, bad, np.log(np.where(bad, 1.0, a)), "ln of a nonpositive value", "ln")

        return ln

    def sqrt(X):
        a = f(X)
        bad = a < 0
        return _domain(strict, bad, np.sqrt(np.where(bad, 0.0, a)), "sqrt of a negative value", "sqrt")

    return sqrt


class Expression:
    """Parsed expression with vectorized evaluation.

    Examples
    --------
    >>> e = Expression("max(0, x1)")
    >>> float(e([3.0]))
    3.0
    """

    def __init__(self, source: Union[str, Node], dim: Optional[int] = None, strict: bool = True):
        self.ast = parse_expression(source, dim) if isinstance(source, str) else source
        self.strict = strict
        self._fn = compile_expression(self.ast, strict)

    def __call__(self, x) -> np.ndarray:
        X = np.asarray(x, dtype=float)
        if X.ndim == 0:
            X = X.reshape(1)
        out = self._fn(X)
        return np.broadcast_to(out, X.shape[:-1]).astype(float)

    def __str__(self):
        return to_text(self.ast)

    def __repr__(self):
        return f"Expression({str(self)!r})"

    def __eq__(self, other):
        return isinstance(other, Expression) and self.ast == other.ast

    def __hash__(self):
        return hash(self.ast)

    @property
    def max_variable(self) -> int:
        return max_variable(self.ast)
