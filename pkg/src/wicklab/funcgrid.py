"""Grid-sampled functions on [0,1]^k and a small expression language for them.

Grammar (whitespace-insensitive)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | power
    power  := atom ('^' integer)?
    atom   := number | ident | ident '(' expr ')' | '(' expr ')'

Identifiers are the variables ``x`` (arity 1 only) and ``x1`` .. ``xk``, the
constant ``pi``, and the functions ``sin cos exp sqrt abs``.

Grids use the points ``i/n`` for ``i = 1..n`` on every axis; ``i = 0`` is
never sampled.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np

from .errors import (
    ArityError,
    ExprSyntaxError,
    GridMismatchError,
    NonFiniteValueError,
    UnknownIdentifierError,
)

__all__ = [
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Pow",
    "Call",
    "Expr",
    "parse_expr",
    "to_source",
    "evaluate",
    "GridFunction",
    "sample",
    "constant",
    "weighted_grid_sum",
    "riemann_inner_product",
    "load_csv",
    "parse_csv",
    "dump_csv",
]

FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "abs": np.abs,
}
CONSTANTS = {"pi": math.pi}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    name: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Pow, Call]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


class _Parser:
    def __init__(self, source: str, arity: int):
        self.src = source
        self.arity = arity
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while True:
            m = _TOKEN.match(source, pos)
            if m is None or m.end() == pos:
                rest = source[pos:]
                if rest.strip():
                    off = pos + len(rest) - len(rest.lstrip())
                    raise ExprSyntaxError(f"unexpected character {source[off]!r}", off, source)
                break
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        self.tokens.append(("end", "", len(source)))
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str):
        kind, val, off = self.take()
        if val != text or kind == "end":
            what = "end of input" if kind == "end" else repr(val)
            raise ExprSyntaxError(f"expected {text!r}, found {what}", off, self.src)

    def parse(self) -> Expr:
        node = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", off, self.src)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Expr:
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            kind, val, off = self.take()
            if kind != "num" or not val.isdigit():
                raise ExprSyntaxError("exponent must be a nonnegative integer literal", off, self.src)
            return Pow(base, int(val))
        return base

    def atom(self) -> Expr:
        kind, val, off = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "ident":
            if self.peek()[:2] == ("op", "("):
                if val not in FUNCTIONS:
                    raise UnknownIdentifierError(f"unknown function {val!r}", off, self.src)
                self.take()
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            return self.identifier(val, off)
        if (kind, val) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(val)
        raise ExprSyntaxError(f"unexpected {what}", off, self.src)

    def identifier(self, name: str, off: int) -> Expr:
        if name in CONSTANTS:
            return Num(CONSTANTS[name])
        if name == "x":
            if self.arity != 1:
                raise ArityError("bare 'x' is only valid for arity 1; use x1..xk", off, self.src)
            return Var(1)
        m = re.fullmatch(r"x([1-9][0-9]*)", name)
        if m:
            idx = int(m.group(1))
            if idx > self.arity:
                raise ArityError(f"variable {name} exceeds arity {self.arity}", off, self.src)
            return Var(idx)
        raise UnknownIdentifierError(f"unknown identifier {name!r}", off, self.src)


def parse_expr(source: str, arity: int = 1) -> Expr:
    """Parse ``source`` into an expression tree over ``arity`` variables."""
    if arity < 1:
        raise ValueError("arity must be positive")
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0, source)
    return _Parser(source, arity).parse()


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(node: Expr) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    if isinstance(node, Pow):
        return 4
    return 5


def to_source(node: Expr, arity: int = 1) -> str:
    """Canonical printer; ``parse_expr(to_source(e)) == e`` for parsed trees."""

    def wrap(child: Expr, needs: bool) -> str:
        s = to_source(child, arity)
        return f"({s})" if needs else s

    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return "x" if arity == 1 else f"x{node.index}"
    if isinstance(node, Neg):
        return "-" + wrap(node.operand, _prec(node.operand) < 3)
    if isinstance(node, Pow):
        return f"{wrap(node.base, _prec(node.base) < 5)}^{node.exponent}"
    if isinstance(node, Call):
        return f"{node.name}({to_source(node.arg, arity)})"
    p = _PREC[node.op]
    left = wrap(node.left, _prec(node.left) < p)
    right = wrap(node.right, _prec(node.right) <= p)
    return f"{left} {node.op} {right}"


def arity_of(node: Expr) -> int:
    """Largest variable index used (0 for constants)."""
    if isinstance(node, Var):
        return node.index
    if isinstance(node, Num):
        return 0
    if isinstance(node, (Neg, Call)):
        return arity_of(node.operand if isinstance(node, Neg) else node.arg)
    if isinstance(node, Pow):
        return arity_of(node.base)
    return max(arity_of(node.left), arity_of(node.right))


def evaluate(node: Expr, *xs):
    """Evaluate with numpy broadcasting; ``xs[i]`` feeds variable ``i+1``."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return xs[node.index - 1]
    if isinstance(node, Neg):
        return -evaluate(node.operand, *xs)
    if isinstance(node, Pow):
        return evaluate(node.base, *xs) ** node.exponent
    if isinstance(node, Call):
        return FUNCTIONS[node.name](evaluate(node.arg, *xs))
    a = evaluate(node.left, *xs)
    b = evaluate(node.right, *xs)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    return np.divide(a, b)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values ``f(i1/n, ..., ik/n)`` for ``i`` in ``1..n`` on every axis.

    ``values`` has shape ``(n,) * arity``; ``values[i-1, ...]`` is the sample
    at grid index ``i``.
    """

    n: int
    arity: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if self.n < 1 or self.arity < 1:
            raise ValueError("n and arity must be positive")
        if vals.size != self.n**self.arity:
            raise GridMismatchError(
                f"expected {self.n}**{self.arity} values, got {vals.size}"
            )
        vals = vals.reshape((self.n,) * self.arity)
        bad = np.argwhere(~np.isfinite(vals))
        if len(bad):
            idx = tuple(int(i) + 1 for i in bad[0])
            raise NonFiniteValueError(idx, float(vals[tuple(bad[0])]))
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def points(self) -> np.ndarray:
        return np.arange(1, self.n + 1) / self.n

    def __eq__(self, other):
        if not isinstance(other, GridFunction):
            return NotImplemented
        return (
            self.n == other.n
            and self.arity == other.arity
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


def sample(expr: Expr | str, n: int, arity: int | None = None) -> GridFunction:
    """Sample an expression on the grid ``{1/n, ..., 1}^arity``."""
    if isinstance(expr, str):
        expr = parse_expr(expr, arity or 1)
    if arity is None:
        arity = max(arity_of(expr), 1)
    if n < 1:
        raise ValueError("n must be positive")
    axis = np.arange(1, n + 1, dtype=np.float64) / n
    grids = np.meshgrid(*([axis] * arity), indexing="ij") if arity > 1 else [axis]
    with np.errstate(all="ignore"):
        vals = np.broadcast_to(np.asarray(evaluate(expr, *grids), dtype=np.float64), (n,) * arity)
    return GridFunction(n, arity, vals.copy())


def constant(c: float, n: int, arity: int = 1) -> GridFunction:
    return GridFunction(n, arity, np.full((n,) * arity, float(c)))


def _common_n(funcs: Sequence[GridFunction]) -> int:
    ns = {f.n for f in funcs}
    if len(ns) != 1:
        raise GridMismatchError(f"grid sizes differ: {sorted(ns)}")
    if any(f.arity != 1 for f in funcs):
        raise GridMismatchError("univariate grid functions required")
    return ns.pop()


def weighted_grid_sum(factors: Sequence[GridFunction]) -> float:
    """``sum_k prod_d f_d(k/n) * n**(-L/2)`` for ``L = len(factors)``."""
    if not factors:
        raise ValueError("at least one factor required")
    n = _common_n(factors)
    prod = np.ones(n)
    for f in factors:
        prod = prod * f.values
    return float(prod.sum() * n ** (-len(factors) / 2))


def riemann_inner_product(f: GridFunction, g: GridFunction) -> float:
    """``sum_k f(k/n) g(k/n) / n``."""
    n = _common_n([f, g])
    return float((f.values * g.values).sum() / n)


def parse_csv(text: str) -> GridFunction:
    """Read a grid function: first row ``n,arity``, then one value per row.

    A literal ``n,arity`` label row before the numbers is tolerated.
    """
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if rows and [c.strip() for c in rows[0]] == ["n", "arity"]:
        rows = rows[1:]
    if not rows or len(rows[0]) != 2:
        raise ValueError("CSV must start with an 'n,arity' row")
    n, arity = int(rows[0][0]), int(rows[0][1])
    values = [float(r[0]) for r in rows[1:]]
    return GridFunction(n, arity, np.asarray(values))


def load_csv(path: str | Path) -> GridFunction:
    return parse_csv(Path(path).read_text())


def dump_csv(g: GridFunction) -> str:
    lines = ["n,arity", f"{g.n},{g.arity}"]
    lines += [repr(float(v)) for v in g.values.ravel()]
    return "\n".join(lines) + "\n"
