"""Equation expression language: AST, parser, renderer, and evaluator.

The grammar is a pragmatic subset of what system-dynamics tools put in
equation fields: arithmetic, comparisons, boolean logic, and a small set
of builtin functions. Precedence, tightest first:

    ^  >  unary -/NOT  >  * /  >  + -  >  comparisons  >  AND  >  OR

All binary tiers are left-associative; parentheses override. Identifiers
are canonicalized at parse time.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

from .names import canonicalize_name

__all__ = [
    "NumberLiteral",
    "Identifier",
    "Unary",
    "Binary",
    "Call",
    "ExpressionAst",
    "BUILTINS",
    "parse_equation",
    "render_equation",
    "dependencies",
    "evaluate",
    "EquationSyntaxError",
    "UnknownFunction",
    "UnboundIdentifier",
    "DomainError",
    "DivisionByZero",
]


class EquationSyntaxError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnknownFunction(ValueError):
    def __init__(self, name: str):
        super().__init__(f"unknown function: {name}")
        self.name = name


class UnboundIdentifier(KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name


class DomainError(ArithmeticError):
    pass


class DivisionByZero(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class NumberLiteral:
    value: float


@dataclass(frozen=True)
class Identifier:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "negate" | "not"
    child: "ExpressionAst"


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * / ^ < <= > >= = <> and or
    left: "ExpressionAst"
    right: "ExpressionAst"


@dataclass(frozen=True)
class Call:
    function: str
    args: tuple["ExpressionAst", ...]


ExpressionAst = Union[NumberLiteral, Identifier, Unary, Binary, Call]

# function -> (min arity, max arity or None for unbounded)
BUILTINS: dict[str, tuple[int, int | None]] = {
    "MIN": (2, None),
    "MAX": (2, None),
    "ABS": (1, 1),
    "EXP": (1, 1),
    "LN": (1, 1),
    "SQRT": (1, 1),
    "INT": (1, 1),
    "IF_THEN_ELSE": (3, 3),
    "SAFEDIV": (2, 3),
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)
  | (?P<quoted>"[^"]*")
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|<>|!=|[-+*/^<>=(),])
    """,
    re.VERBOSE,
)

_KEYWORDS = {"and", "or", "not"}


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens: list[tuple[str, str, int]] = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise EquationSyntaxError(f"unexpected character {src[pos]!r}", pos)
        kind = m.lastgroup
        text = m.group()
        if kind != "ws":
            if kind == "name" and text.lower() in _KEYWORDS:
                kind = "op"
                text = text.lower()
            tokens.append((kind, text, pos))
        pos = m.end()
    tokens.append(("eof", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def next(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, text: str) -> None:
        kind, tok, off = self.next()
        if kind != "op" or tok != text:
            raise EquationSyntaxError(f"expected {text!r}, found {tok!r}", off)

    def parse(self) -> ExpressionAst:
        node = self.or_expr()
        kind, tok, off = self.peek()
        if kind != "eof":
            raise EquationSyntaxError(f"trailing input {tok!r}", off)
        return node

    def or_expr(self) -> ExpressionAst:
        node = self.and_expr()
        while self.peek()[:2] == ("op", "or"):
            self.next()
            node = Binary("or", node, self.and_expr())
        return node

    def and_expr(self) -> ExpressionAst:
        node = self.comparison()
        while self.peek()[:2] == ("op", "and"):
            self.next()
            node = Binary("and", node, self.comparison())
        return node

    def comparison(self) -> ExpressionAst:
        node = self.additive()
        while True:
            kind, tok, _ = self.peek()
            if kind == "op" and tok in ("<", "<=", ">", ">=", "=", "<>", "!="):
                self.next()
                op = "<>" if tok == "!=" else tok
                node = Binary(op, node, self.additive())
            else:
                return node

    def additive(self) -> ExpressionAst:
        node = self.multiplicative()
        while True:
            kind, tok, _ = self.peek()
            if kind == "op" and tok in ("+", "-"):
                self.next()
                node = Binary(tok, node, self.multiplicative())
            else:
                return node

    def multiplicative(self) -> ExpressionAst:
        node = self.unary()
        while True:
            kind, tok, _ = self.peek()
            if kind == "op" and tok in ("*", "/"):
                self.next()
                node = Binary(tok, node, self.unary())
            else:
                return node

    def unary(self) -> ExpressionAst:
        kind, tok, _ = self.peek()
        if kind == "op" and tok == "-":
            self.next()
            return Unary("negate", self.unary())
        if kind == "op" and tok == "not":
            self.next()
            return Unary("not", self.unary())
        return self.power()

    def power(self) -> ExpressionAst:
        node = self.atom()
        while self.peek()[:2] == ("op", "^"):
            self.next()
            # allow a signed exponent: 2^-3
            if self.peek()[:2] == ("op", "-"):
                self.next()
                exponent: ExpressionAst = Unary("negate", self.atom())
            else:
                exponent = self.atom()
            node = Binary("^", node, exponent)
        return node

    def atom(self) -> ExpressionAst:
        kind, tok, off = self.next()
        if kind == "number":
            return NumberLiteral(float(tok))
        if kind == "quoted":
            return Identifier(canonicalize_name(tok[1:-1]))
        if kind == "name":
            if self.peek()[:2] == ("op", "("):
                return self.call(tok, off)
            return Identifier(canonicalize_name(tok))
        if kind == "op" and tok == "(":
            node = self.or_expr()
            self.expect_op(")")
            return node
        raise EquationSyntaxError(f"unexpected token {tok!r}", off)

    def call(self, name: str, off: int) -> ExpressionAst:
        func = name.upper()
        if func not in BUILTINS:
            raise UnknownFunction(name)
        self.expect_op("(")
        args: list[ExpressionAst] = []
        if self.peek()[:2] != ("op", ")"):
            args.append(self.or_expr())
            while self.peek()[:2] == ("op", ","):
                self.next()
                args.append(self.or_expr())
        self.expect_op(")")
        lo, hi = BUILTINS[func]
        if len(args) < lo or (hi is not None and len(args) > hi):
            raise EquationSyntaxError(
                f"{func} takes {lo}{'+' if hi is None else f'..{hi}' if hi != lo else ''} "
                f"arguments, got {len(args)}",
                off,
            )
        return Call(func, tuple(args))


def parse_equation(src: str) -> ExpressionAst:
    """Parse equation text into an AST. Raises EquationSyntaxError or UnknownFunction."""
    if not src.strip():
        raise EquationSyntaxError("empty equation", 0)
    return _Parser(src).parse()


_PRECEDENCE = {
    "or": 1,
    "and": 2,
    "<": 3, "<=": 3, ">": 3, ">=": 3, "=": 3, "<>": 3,
    "+": 4, "-": 4,
    "*": 5, "/": 5,
    "negate": 6, "not": 6,
    "^": 7,
}
_ATOM_PRECEDENCE = 8


def _prec(node: ExpressionAst) -> int:
    if isinstance(node, Binary):
        return _PRECEDENCE[node.op]
    if isinstance(node, Unary):
        return _PRECEDENCE[node.op]
    return _ATOM_PRECEDENCE


def _fmt_number(value: float) -> str:
    if value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def render_equation(node: ExpressionAst) -> str:
    """Render an AST back to equation text; parse(render(ast)) == ast."""
    if isinstance(node, NumberLiteral):
        return _fmt_number(node.value)
    if isinstance(node, Identifier):
        return node.name
    if isinstance(node, Unary):
        child = render_equation(node.child)
        if _prec(node.child) < _prec(node):
            child = f"({child})"
        return f"-{child}" if node.op == "negate" else f"NOT {child}"
    if isinstance(node, Binary):
        prec = _prec(node)
        left = render_equation(node.left)
        if _prec(node.left) < prec:
            left = f"({left})"
        right = render_equation(node.right)
        if _prec(node.right) <= prec:
            right = f"({right})"
        op = node.op.upper() if node.op in ("and", "or") else node.op
        return f"{left} {op} {right}"
    if isinstance(node, Call):
        return f"{node.function}({', '.join(render_equation(a) for a in node.args)})"
    raise TypeError(f"not an expression node: {node!r}")


def dependencies(ast: ExpressionAst) -> frozenset[str]:
    """The set of identifier names occurring anywhere in the tree."""
    out: set[str] = set()
    stack = [ast]
    while stack:
        node = stack.pop()
        if isinstance(node, Identifier):
            out.add(node.name)
        elif isinstance(node, Unary):
            stack.append(node.child)
        elif isinstance(node, Binary):
            stack.append(node.left)
            stack.append(node.right)
        elif isinstance(node, Call):
            stack.extend(node.args)
    return frozenset(out)


def _truthy(x: float) -> bool:
    return x != 0.0


def evaluate(ast: ExpressionAst, bindings: Mapping[str, float]) -> float:
    """Evaluate an AST under the given identifier bindings.

    Comparisons and logic yield 1.0/0.0. SAFEDIV(a, b[, alt]) yields alt
    (default 0) when b is zero; plain division by zero raises.
    """
    if isinstance(ast, NumberLiteral):
        return ast.value
    if isinstance(ast, Identifier):
        try:
            return float(bindings[ast.name])
        except KeyError:
            raise UnboundIdentifier(ast.name) from None
    if isinstance(ast, Unary):
        v = evaluate(ast.child, bindings)
        return -v if ast.op == "negate" else (0.0 if _truthy(v) else 1.0)
    if isinstance(ast, Binary):
        if ast.op == "and":
            return 1.0 if _truthy(evaluate(ast.left, bindings)) and _truthy(evaluate(ast.right, bindings)) else 0.0
        if ast.op == "or":
            return 1.0 if _truthy(evaluate(ast.left, bindings)) or _truthy(evaluate(ast.right, bindings)) else 0.0
        a = evaluate(ast.left, bindings)
        b = evaluate(ast.right, bindings)
        if ast.op == "+":
            return a + b
        if ast.op == "-":
            return a - b
        if ast.op == "*":
            return a * b
        if ast.op == "/":
            if b == 0.0:
                raise DivisionByZero("division by zero")
            return a / b
        if ast.op == "^":
            if a == 0.0 and b < 0.0:
                raise DomainError("0 raised to a negative power")
            if a < 0.0 and b != int(b):
                raise DomainError("negative base with fractional exponent")
            return float(a**b)
        table = {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b, "=": a == b, "<>": a != b}
        return 1.0 if table[ast.op] else 0.0
    if isinstance(ast, Call):
        return _call(ast, bindings)
    raise TypeError(f"not an expression node: {ast!r}")


def _call(node: Call, bindings: Mapping[str, float]) -> float:
    f = node.function
    if f == "IF_THEN_ELSE":
        cond = evaluate(node.args[0], bindings)
        return evaluate(node.args[1] if _truthy(cond) else node.args[2], bindings)
    if f == "SAFEDIV":
        denom = evaluate(node.args[1], bindings)
        if denom == 0.0:
            return evaluate(node.args[2], bindings) if len(node.args) == 3 else 0.0
        return evaluate(node.args[0], bindings) / denom
    vals = [evaluate(a, bindings) for a in node.args]
    if f == "MIN":
        return min(vals)
    if f == "MAX":
        return max(vals)
    if f == "ABS":
        return abs(vals[0])
    if f == "EXP":
        return math.exp(vals[0])
    if f == "LN":
        if vals[0] <= 0.0:
            raise DomainError(f"LN of non-positive value {vals[0]}")
        return math.log(vals[0])
    if f == "SQRT":
        if vals[0] < 0.0:
            raise DomainError(f"SQRT of negative value {vals[0]}")
        return math.sqrt(vals[0])
    if f == "INT":
        return float(math.trunc(vals[0]))
    raise UnknownFunction(f)
