"""Closed expression grammar for coefficient fields.

Grammar (whitespace insignificant)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | '+' unary | power
    power   := atom ('^' ['-'] INTEGER)?
    atom    := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

NAME is one of ``x1 .. xd``, ``y1 .. yd`` or the constant ``pi``; FUNC is one
of ``sin``, ``cos``, ``exp``.  Exponents must be integer literals, so ``^``
never produces complex values.  ``-x^2`` parses as ``-(x^2)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
CONSTANTS = {"pi": math.pi}
_VAR_RE = re.compile(r"^[xy][1-9]$")


class ExpressionError(ValueError):
    """Raised for syntax errors, unknown identifiers and arity mismatches."""

    def __init__(self, message: str, position: int | None = None):
        self.position = position
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, Const, Neg, BinOp, Pow, Call]


# ---------------------------------------------------------------------------
# tokenizer / parser

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        if source[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(source, pos)
        if m is None or m.end() == pos:
            start = pos + (len(source[pos:]) - len(source[pos:].lstrip()))
            raise ExpressionError(f"unexpected character {source[start]!r}", start)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str):
        kind, value, pos = self.take()
        if value != text or kind == "end":
            found = "end of input" if kind == "end" else repr(value)
            raise ExpressionError(f"expected {text!r}, found {found}", pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, value, pos = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected token {value!r}", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.take()
            return Neg(self.unary())
        if kind == "op" and value == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        kind, value, _ = self.peek()
        if kind == "op" and value == "^":
            self.take()
            sign = 1
            if self.peek()[:2] == ("op", "-"):
                self.take()
                sign = -1
            kind, value, pos = self.take()
            if kind != "num" or not re.fullmatch(r"\d+", value):
                raise ExpressionError("exponent must be an integer literal", pos)
            return Pow(base, sign * int(value))
        return base

    def atom(self) -> Node:
        kind, value, pos = self.take()
        if kind == "num":
            return Num(float(value))
        if kind == "name":
            if value in FUNCTIONS:
                if self.peek()[1] != "(":
                    raise ExpressionError(f"function {value!r} requires one argument", pos)
                self.take()
                arg = self.expr()
                if self.peek()[1] == ",":
                    raise ExpressionError(f"function {value!r} takes exactly one argument", self.peek()[2])
                self.expect(")")
                return Call(value, arg)
            if value in CONSTANTS:
                return Const(value)
            if _VAR_RE.match(value):
                return Var(value)
            raise ExpressionError(f"unknown identifier {value!r}", pos)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(value)
        raise ExpressionError(f"unexpected {found}", pos)


def parse_expression(source: str) -> "Expression":
    """Parse ``source`` into an :class:`Expression`."""
    if not isinstance(source, str):
        raise ExpressionError(f"expression source must be text, got {type(source).__name__}")
    return Expression(_Parser(source).parse(), source)


# ---------------------------------------------------------------------------
# printing and evaluation

def to_source(node: Node) -> str:
    """Fully parenthesised canonical text; ``parse(to_source(n))`` gives ``n`` back."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, (Var, Const)):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_source(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    if isinstance(node, Pow):
        return f"({to_source(node.base)}^{node.exponent})"
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


def _eval(node: Node, env: Mapping[str, np.ndarray]):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise ExpressionError(f"variable {node.name!r} is not bound") from None
    if isinstance(node, Const):
        return CONSTANTS[node.name]
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, BinOp):
        left = _eval(node.left, env)
        right = _eval(node.right, env)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        return np.divide(left, right)
    if isinstance(node, Pow):
        base = np.asarray(_eval(node.base, env), dtype=float)
        if node.exponent < 0:
            return 1.0 / base ** (-node.exponent)
        return base ** node.exponent
    if isinstance(node, Call):
        return FUNCTIONS[node.func](_eval(node.arg, env))
    raise TypeError(f"not an expression node: {node!r}")


def variables(node: Node) -> frozenset[str]:
    if isinstance(node, Var):
        return frozenset([node.name])
    if isinstance(node, (Neg,)):
        return variables(node.operand)
    if isinstance(node, BinOp):
        return variables(node.left) | variables(node.right)
    if isinstance(node, Pow):
        return variables(node.base)
    if isinstance(node, Call):
        return variables(node.arg)
    return frozenset()


@dataclass(frozen=True)
class Expression:
    """Immutable parsed expression; evaluation broadcasts over numpy arrays."""

    root: Node
    source: str = ""

    @property
    def variables(self) -> frozenset[str]:
        return variables(self.root)

    def __str__(self) -> str:
        return to_source(self.root)

    def __call__(self, **env) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            value = _eval(self.root, env)
        shapes = [np.shape(v) for v in env.values()]
        shape = np.broadcast_shapes(*shapes) if shapes else ()
        return np.broadcast_to(np.asarray(value, dtype=float), shape).copy()

    def evaluate(self, x, y) -> np.ndarray:
        """Evaluate at points ``x``, ``y`` of shape ``(..., d)``."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        env = {f"x{i + 1}": x[..., i] for i in range(x.shape[-1])}
        env.update({f"y{i + 1}": y[..., i] for i in range(y.shape[-1])})
        return self(**env)
