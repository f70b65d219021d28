"""Formula text parser and evaluator.

A small expression language for defining models inline: decimal literals,
factor references by name, ``+ - * / ^`` with standard precedence
(``^`` right-associative and binding tighter than unary minus), parentheses
and the function set sin, cos, tan, asin, exp, ln, log10, sqrt, abs, min,
max, pow. Parse errors carry the character offset and an expected-token
hint; math faults during evaluation name the failing subexpression.
"""

from __future__ import annotations

from dataclasses import dataclass
import math
import re

import numpy as np

from .errors import EvalFault, FormulaError

__all__ = ["Expr", "Num", "Name", "Unary", "Binary", "Call",
           "parse", "to_text"]

UNARY_FUNCTIONS = {
    "sin": (math.sin, np.sin),
    "cos": (math.cos, np.cos),
    "tan": (math.tan, np.tan),
    "asin": (math.asin, np.arcsin),
    "exp": (math.exp, np.exp),
    "ln": (math.log, np.log),
    "log10": (math.log10, np.log10),
    "sqrt": (math.sqrt, np.sqrt),
    "abs": (abs, np.abs),
}

BINARY_FUNCTIONS = {
    "min": (min, np.minimum),
    "max": (max, np.maximum),
    "pow": (math.pow, np.power),
}

FUNCTION_ARITY = {name: 1 for name in UNARY_FUNCTIONS}
FUNCTION_ARITY.update({name: 2 for name in BINARY_FUNCTIONS})


class Expr:
    """Base class of formula AST nodes."""

    def variables(self) -> set[str]:
        """Names of all referenced factors."""
        out: set[str] = set()
        _collect_names(self, out)
        return out

    def eval(self, env: dict) -> float:
        """Evaluate with scalar bindings; raises EvalFault on math faults."""
        return _eval_scalar(self, env)

    def eval_columns(self, env: dict) -> np.ndarray:
        """Vectorized evaluation over column arrays; math faults surface as
        non-finite entries rather than exceptions."""
        with np.errstate(all="ignore"):
            out = _eval_array(self, env)
        n = len(next(iter(env.values()))) if env else 1
        return np.broadcast_to(np.asarray(out, dtype=float), (n,)).copy()


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Name(Expr):
    name: str


@dataclass(frozen=True)
class Unary(Expr):
    op: str
    operand: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    func: str
    args: tuple


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(source: str):
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None:
            at = pos + len(source[pos:]) - len(source[pos:].lstrip())
            raise FormulaError(f"unexpected character {source[at]!r}", at)
        if m.group("num") is not None:
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.group("name") is not None:
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    @property
    def current(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, symbol: str):
        kind, text, pos = self.current
        if kind != "op" or text != symbol:
            raise FormulaError(f"expected '{symbol}'", pos)
        return self.advance()

    def at_op(self, *symbols) -> bool:
        kind, text, _ = self.current
        return kind == "op" and text in symbols

    # expr := term (('+'|'-') term)*
    def expr(self) -> Expr:
        node = self.term()
        while self.at_op("+", "-"):
            op = self.advance()[1]
            node = Binary(op, node, self.term())
        return node

    # term := unary (('*'|'/') unary)*
    def term(self) -> Expr:
        node = self.unary()
        while self.at_op("*", "/"):
            op = self.advance()[1]
            node = Binary(op, node, self.unary())
        return node

    # unary := '-' unary | power
    def unary(self) -> Expr:
        if self.at_op("-"):
            self.advance()
            return Unary("-", self.unary())
        return self.power()

    # power := atom ('^' unary)?   -- right-associative, allows 2^-3
    def power(self) -> Expr:
        node = self.atom()
        if self.at_op("^"):
            self.advance()
            node = Binary("^", node, self.unary())
        return node

    def atom(self) -> Expr:
        kind, text, pos = self.current
        if kind == "num":
            self.advance()
            return Num(float(text))
        if kind == "name":
            self.advance()
            if self.at_op("("):
                return self.call(text, pos)
            return Name(text)
        if kind == "op" and text == "(":
            self.advance()
            node = self.expr()
            self.expect_op(")")
            return node
        hint = "end of input" if kind == "end" else f"'{text}'"
        raise FormulaError(f"expected a value, name or '(' but found {hint}", pos)

    def call(self, func: str, pos: int) -> Expr:
        if func not in FUNCTION_ARITY:
            raise FormulaError(f"unknown function '{func}'", pos)
        self.expect_op("(")
        args = [self.expr()]
        while self.at_op(","):
            self.advance()
            args.append(self.expr())
        self.expect_op(")")
        want = FUNCTION_ARITY[func]
        if len(args) != want:
            raise FormulaError(
                f"function '{func}' takes {want} argument{'s' if want > 1 else ''}, "
                f"got {len(args)}", pos)
        return Call(func, tuple(args))


def parse(source: str) -> Expr:
    """Parse formula text into an expression tree.

    Raises FormulaError with the character offset on malformed input.
    """
    parser = _Parser(source)
    node = parser.expr()
    kind, text, pos = parser.current
    if kind != "end":
        raise FormulaError(f"unexpected trailing input '{text}'", pos)
    return node


def _collect_names(node: Expr, out: set):
    if isinstance(node, Name):
        out.add(node.name)
    elif isinstance(node, Unary):
        _collect_names(node.operand, out)
    elif isinstance(node, Binary):
        _collect_names(node.left, out)
        _collect_names(node.right, out)
    elif isinstance(node, Call):
        for a in node.args:
            _collect_names(a, out)


def _eval_scalar(node: Expr, env: dict) -> float:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Name):
        try:
            return float(env[node.name])
        except KeyError:
            raise EvalFault(f"unbound name '{node.name}'", to_text(node)) from None
    if isinstance(node, Unary):
        return -_eval_scalar(node.operand, env)
    if isinstance(node, Binary):
        a = _eval_scalar(node.left, env)
        b = _eval_scalar(node.right, env)
        try:
            if node.op == "+":
                return a + b
            if node.op == "-":
                return a - b
            if node.op == "*":
                return a * b
            if node.op == "/":
                return a / b
            return math.pow(a, b)
        except (ZeroDivisionError, ValueError, OverflowError) as exc:
            raise EvalFault(f"math fault: {exc}", to_text(node)) from None
    if isinstance(node, Call):
        args = [_eval_scalar(a, env) for a in node.args]
        fn = (UNARY_FUNCTIONS.get(node.func) or BINARY_FUNCTIONS[node.func])[0]
        try:
            out = fn(*args)
        except (ZeroDivisionError, ValueError, OverflowError) as exc:
            raise EvalFault(f"math fault: {exc}", to_text(node)) from None
        if isinstance(out, float) and not math.isfinite(out):
            raise EvalFault("math fault: non-finite result", to_text(node))
        return float(out)
    raise TypeError(f"not an Expr: {node!r}")


def _eval_array(node: Expr, env: dict):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Name):
        try:
            return env[node.name]
        except KeyError:
            raise EvalFault(f"unbound name '{node.name}'", to_text(node)) from None
    if isinstance(node, Unary):
        return -_eval_array(node.operand, env)
    if isinstance(node, Binary):
        a = _eval_array(node.left, env)
        b = _eval_array(node.right, env)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            return np.divide(a, b)
        return np.power(np.asarray(a, dtype=float), b)
    if isinstance(node, Call):
        args = [_eval_array(a, env) for a in node.args]
        fn = (UNARY_FUNCTIONS.get(node.func) or BINARY_FUNCTIONS[node.func])[1]
        return fn(*args)
    raise TypeError(f"not an Expr: {node!r}")


_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "unary": 3, "^": 4}


def to_text(node: Expr) -> str:
    """Render a tree back to formula text; reparsing yields an equal tree."""
    return _render(node, 0)


def _render(node: Expr, parent_prec: int) -> str:
    if isinstance(node, Num):
        return f"{node.value:.17g}"
    if isinstance(node, Name):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({', '.join(_render(a, 0) for a in node.args)})"
    if isinstance(node, Unary):
        prec = _PRECEDENCE["unary"]
        inner = _render(node.operand, prec)
        text = f"-{inner}"
        return f"({text})" if parent_prec > prec else text
    if isinstance(node, Binary):
        prec = _PRECEDENCE[node.op]
        if node.op == "^":
            # right-associative: parenthesize an exponent base of equal precedence
            left = _render(node.left, prec + 1)
            right = _render(node.right, _PRECEDENCE["unary"])
            text = f"{left}^{right}"
        else:
            left = _render(node.left, prec)
            right = _render(node.right, prec + 1)
            text = f"{left} {node.op} {right}"
        return f"({text})" if parent_prec > prec else text
    raise TypeError(f"not an Expr: {node!r}")
