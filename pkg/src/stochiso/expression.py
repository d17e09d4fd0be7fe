"""Small arithmetic expression language for model right-hand sides.

Grammar (lowest to highest precedence)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' exponent)?
    exponent := ('-' | '+') exponent | atom ('^' exponent)?
    atom   := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

``^`` is right associative and binds tighter than unary minus, so
``-x^2`` is ``-(x^2)``.  Evaluation works on floats and on numpy arrays.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .errors import EvaluationError, ExpressionSyntaxError

FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": np.sqrt}
VARIABLES = ("x", "y")


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Node"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Const, Var, Param, Unary, Binary, Call]

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExpressionSyntaxError(f"unexpected character {text[bad]!r}", text, bad)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        raise ExpressionSyntaxError(message, self.text, tok[2])

    def expect(self, value):
        tok = self.peek()
        if tok[1] != value or tok[0] != "op":
            self.error(f"expected {value!r}")
        return self.advance()

    def parse(self):
        if self.peek()[0] == "end":
            self.error("empty expression")
        node = self.expr()
        if self.peek()[0] != "end":
            self.error(f"unexpected token {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.advance()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            tok = self.advance()
            right = self.unary()
            if tok[1] == "/" and _is_constant_zero(right):
                self.error("division by constant zero", tok)
            node = Binary(tok[1], node, right)
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] in "+-":
            self.advance()
            return Unary(tok[1], self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.advance()
            return Binary("^", base, self.exponent())
        return base

    def exponent(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] in "+-":
            self.advance()
            return Unary(tok[1], self.exponent())
        return self.power()

    def atom(self):
        tok = self.advance()
        kind, value, pos = tok
        if kind == "num":
            return Const(float(value))
        if kind == "name":
            nxt = self.peek()
            if nxt[0] == "op" and nxt[1] == "(":
                if value not in FUNCTIONS:
                    raise ExpressionSyntaxError(f"unknown function {value!r}", self.text, pos)
                self.advance()
                arg = self.expr()
                self.expect(")")
                return Call(value, arg)
            if value in FUNCTIONS:
                raise ExpressionSyntaxError(f"function {value!r} needs an argument", self.text, pos)
            if value in VARIABLES:
                return Var(value)
            return Param(value)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            self.error("unexpected end of expression", tok)
        self.error(f"unexpected token {value!r}", tok)


def _is_constant_zero(node):
    if free_names(node):
        return False
    try:
        with np.errstate(all="ignore"):
            return float(_evaluate(node, {})) == 0.0
    except EvaluationError:
        return False


def parse_expression(text: str) -> Node:
    """Parse ``text`` into an immutable AST."""
    if not isinstance(text, str):
        raise ExpressionSyntaxError("expression must be a string", str(text), 0)
    return _Parser(text).parse()


def free_names(node: Node) -> set[str]:
    """Names of all variables and parameters referenced by ``node``."""
    if isinstance(node, (Var, Param)):
        return {node.name}
    if isinstance(node, Unary):
        return free_names(node.operand)
    if isinstance(node, Binary):
        return free_names(node.left) | free_names(node.right)
    if isinstance(node, Call):
        return free_names(node.arg)
    return set()


def to_text(node: Node) -> str:
    """Pretty-print; every compound subexpression is parenthesized so the
    output reparses to a structurally equal tree."""
    if isinstance(node, Const):
        return repr(float(node.value))
    if isinstance(node, (Var, Param)):
        return node.name
    if isinstance(node, Unary):
        return f"({node.op}{to_text(node.operand)})"
    if isinstance(node, Binary):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({to_text(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


def _evaluate(node, bindings):
    if isinstance(node, Const):
        return np.float64(node.value)
    if isinstance(node, (Var, Param)):
        try:
            return bindings[node.name]
        except KeyError:
            raise EvaluationError(f"unbound name {node.name!r}") from None
    if isinstance(node, Unary):
        val = _evaluate(node.operand, bindings)
        return -val if node.op == "-" else +val
    if isinstance(node, Binary):
        a = _evaluate(node.left, bindings)
        b = _evaluate(node.right, bindings)
        op = node.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            return np.divide(a, b)
        return np.power(a, b)
    if isinstance(node, Call):
        return FUNCTIONS[node.func](_evaluate(node.arg, bindings))
    raise TypeError(f"not an expression node: {node!r}")


def eval_expression(node: Node, bindings: Mapping[str, object]):
    """Evaluate ``node``; bindings may be floats or broadcastable arrays.

    Raises EvaluationError for unbound names and for any non-finite result
    (division by zero, sqrt of a negative number, overflow).
    """
    prepared = {k: np.asarray(v, dtype=float) for k, v in bindings.items()}
    try:
        with np.errstate(divide="raise", invalid="raise", over="raise", under="ignore"):
            value = _evaluate(node, prepared)
    except FloatingPointError as exc:
        raise EvaluationError(f"non-finite result evaluating {to_text(node)}: {exc}") from None
    value = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(value)):
        raise EvaluationError(f"non-finite result evaluating {to_text(node)}")
    if value.ndim == 0:
        return float(value)
    return value
