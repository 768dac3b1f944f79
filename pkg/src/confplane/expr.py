"""Closed-form scalar expressions in ``x`` and ``y``.

A small recursive-descent parser produces an immutable AST that can be
evaluated (scalar or vectorized over numpy arrays), differentiated
symbolically and printed back to text that reparses to the same tree.

Grammar (EBNF)::

    expr    = term , { ("+" | "-") , term } ;
    term    = unary , { ("*" | "/") , unary } ;
    unary   = "-" , unary | power ;
    power   = atom , [ "^" , exponent ] ;
    exponent= "-" , exponent | atom , [ "^" , exponent ] ;   (* must fold to a constant *)
    atom    = number | "x" | "y" | func , "(" , expr , ")" | "(" , expr , ")" ;
    func    = "exp" | "log" | "sqrt" | "sin" | "cos" | "atan" ;
    number  = digits , [ "." , [ digits ] ] , [ expo ] | "." , digits , [ expo ] ;
    expo    = ("e" | "E") , [ "+" | "-" ] , digits ;

A unary minus applied directly to a numeric literal folds into a negative
constant so that printed negative constants reparse to the same node.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

__all__ = [
    "Const",
    "Var",
    "Unary",
    "Binary",
    "Expr",
    "ExprError",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "NonConstantExponentError",
    "ExprDomainError",
    "parse",
    "evaluate",
    "evaluate_array",
    "compile_expr",
    "diff",
    "to_text",
    "has_variable",
    "tree_depth",
    "const",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "power",
    "func",
]

FUNCTIONS = ("exp", "log", "sqrt", "sin", "cos", "atan")
VARIABLES = ("x", "y")

MAX_DEPTH = 100  # parenthesis / function nesting
MAX_TOKENS = 4000
MAX_TREE_DEPTH = 600


class ExprError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExprSyntaxError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r}", offset)
        self.name = name


class NonConstantExponentError(ExprSyntaxError):
    def __init__(self, offset: int):
        super().__init__("exponent must be constant", offset)


class ExprDomainError(ExprError):
    """Raised when an expression is evaluated outside its domain."""

    def __init__(self, message: str, subexpr: "Expr", point: tuple[float, float] | None = None):
        where = "" if point is None else f" at (x={point[0]!r}, y={point[1]!r})"
        super().__init__(f"{message} in {to_text(subexpr)!r}{where}")
        self.subexpr = subexpr
        self.point = point


# --------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or one of FUNCTIONS
    arg: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str  # "+", "-", "*", "/", "^"
    left: "Expr"
    right: "Expr"


Expr = Union[Const, Var, Unary, Binary]


def has_variable(e: Expr) -> bool:
    if isinstance(e, Var):
        return True
    if isinstance(e, Const):
        return False
    if isinstance(e, Unary):
        return has_variable(e.arg)
    return has_variable(e.left) or has_variable(e.right)


# --------------------------------------------------------------------------
# Tokenizer / parser

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    offset: int


def _tokenize(text: str) -> list[_Tok]:
    data = text.encode("utf-8")
    toks: list[_Tok] = []
    pos = 0
    # offsets are byte offsets; map char positions through the utf-8 encoding
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            rest = text[pos:]
            if rest.strip() == "":
                break
            bad = pos + (len(rest) - len(rest.lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[bad]!r}", len(text[:bad].encode("utf-8")))
        kind = m.lastgroup
        if kind is None:
            break
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), len(text[:start].encode("utf-8"))))
        if len(toks) > MAX_TOKENS:
            raise ExprSyntaxError(f"expression exceeds {MAX_TOKENS} tokens", toks[-1].offset)
        pos = m.end()
    toks.append(_Tok("end", "", len(data)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.depth = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.peek()
        if tok.kind != "op" or tok.text != text:
            found = "end of input" if tok.kind == "end" else repr(tok.text)
            raise ExprSyntaxError(f"expected {text!r}, found {found}", tok.offset)
        return self.take()

    def _enter(self, tok: _Tok) -> None:
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise ExprSyntaxError(f"nesting deeper than {MAX_DEPTH}", tok.offset)

    def parse(self) -> Expr:
        e = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ExprSyntaxError(f"unexpected {tok.text!r}", tok.offset)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.take().text
            e = Binary(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.take().text
            e = Binary(op, e, self.unary())
        return e

    def unary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.take()
            self._enter(tok)
            nxt = self.peek()
            arg = self.unary()
            self.depth -= 1
            if isinstance(arg, Const) and nxt.kind == "num" and self.toks[self.i - 1] is nxt:
                return Const(-arg.value)
            return Unary("neg", arg)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.take()
            start = self.peek().offset
            ex = self.exponent()
            if has_variable(ex):
                raise NonConstantExponentError(start)
            value = _eval_const(ex)
            return Binary("^", base, Const(value))
        return base

    def exponent(self) -> Expr:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.take()
            self._enter(tok)
            e = self.exponent()
            self.depth -= 1
            return Unary("neg", e)
        base = self.atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.take()
            start = self.peek().offset
            ex = self.exponent()
            if has_variable(ex):
                raise NonConstantExponentError(start)
            return Binary("^", base, Const(_eval_const(ex)))
        return base

    def atom(self) -> Expr:
        tok = self.take()
        if tok.kind == "num":
            return Const(float(tok.text))
        if tok.kind == "name":
            if tok.text in VARIABLES:
                return Var(tok.text)
            if tok.text in FUNCTIONS:
                self._enter(tok)
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                self.depth -= 1
                return Unary(tok.text, arg)
            raise UnknownIdentifierError(tok.text, tok.offset)
        if tok.kind == "op" and tok.text == "(":
            self._enter(tok)
            e = self.expr()
            self.expect(")")
            self.depth -= 1
            return e
        if tok.kind == "end":
            raise ExprSyntaxError("unexpected end of input", tok.offset)
        raise ExprSyntaxError(f"unexpected {tok.text!r}", tok.offset)


def _eval_const(e: Expr) -> float:
    return evaluate(e, (0.0, 0.0))


def tree_depth(e: Expr) -> int:
    """Depth of the tree, computed without recursion."""
    best = 0
    stack = [(e, 1)]
    while stack:
        node, d = stack.pop()
        best = max(best, d)
        if isinstance(node, Unary):
            stack.append((node.arg, d + 1))
        elif isinstance(node, Binary):
            stack.append((node.left, d + 1))
            stack.append((node.right, d + 1))
    return best


def parse(text: str) -> Expr:
    """Parse ``text`` into an expression tree.

    Raises ``ExprSyntaxError`` (with a byte offset) for malformed input,
    ``UnknownIdentifierError`` for names other than x, y and the builtin
    functions, and ``NonConstantExponentError`` when ``^`` has a variable
    exponent.
    """
    if not isinstance(text, str) or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    e = _Parser(text).parse()
    if tree_depth(e) > MAX_TREE_DEPTH:
        raise ExprSyntaxError(f"expression tree deeper than {MAX_TREE_DEPTH}", 0)
    return e


# --------------------------------------------------------------------------
# Printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _prec(e: Expr) -> int:
    if isinstance(e, Const):
        return 5  # negative constants print self-parenthesized
    if isinstance(e, Var):
        return 5
    if isinstance(e, Unary):
        return _PREC["neg"] if e.op == "neg" else 5
    return _PREC[e.op]


def _fmt_const(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        s = str(int(v))
    else:
        s = repr(v)
    return f"({s})" if v < 0 else s


def to_text(e: Expr) -> str:
    """Render ``e`` with the minimal parentheses that preserve its structure."""
    if isinstance(e, Const):
        return _fmt_const(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            inner = to_text(e.arg)
            # "-2" would reparse as a folded constant, so keep literals wrapped
            if _prec(e.arg) <= _PREC["neg"] or isinstance(e.arg, Const):
                return f"-({inner})"
            return f"-{inner}"
        return f"{e.op}({to_text(e.arg)})"
    p = _PREC[e.op]
    left, right = to_text(e.left), to_text(e.right)
    if e.op == "^":
        if _prec(e.left) <= p:
            left = f"({left})"
        return f"{left}^{right}"
    if _prec(e.left) < p:
        left = f"({left})"
    if _prec(e.right) <= p:
        right = f"({right})"
    return f"{left}{e.op}{right}"


# --------------------------------------------------------------------------
# Evaluation

_NP_FUNCS: dict[str, Callable] = {
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "sin": np.sin,
    "cos": np.cos,
    "atan": np.arctan,
}


def _check(e: Expr, mask: np.ndarray, message: str, x: np.ndarray, y: np.ndarray) -> None:
    if np.any(mask):
        idx = int(np.flatnonzero(np.broadcast_to(mask, x.shape))[0])
        raise ExprDomainError(message, e, (float(x.flat[idx]), float(y.flat[idx])))


def _interp(e: Expr, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    if isinstance(e, Const):
        return np.asarray(e.value, dtype=float)
    if isinstance(e, Var):
        return x if e.name == "x" else y
    if isinstance(e, Unary):
        a = _interp(e.arg, x, y)
        if e.op == "neg":
            return -a
        if e.op == "log":
            _check(e, a <= 0, "log of nonpositive value", x, y)
        elif e.op == "sqrt":
            _check(e, a < 0, "sqrt of negative value", x, y)
        return _NP_FUNCS[e.op](a)
    a = _interp(e.left, x, y)
    b = _interp(e.right, x, y)
    if e.op == "+":
        out = a + b
    elif e.op == "-":
        out = a - b
    elif e.op == "*":
        out = a * b
    elif e.op == "/":
        _check(e, b == 0, "division by zero", x, y)
        out = a / b
    else:
        ex = float(b)
        if not ex.is_integer():
            _check(e, a < 0, "non-integer power of negative value", x, y)
        if ex < 0:
            _check(e, a == 0, "negative power of zero", x, y)
        out = np.power(a, ex)
    _check(e, np.isnan(out) & ~(np.isnan(a) | np.isnan(b)), "undefined value", x, y)
    return out


def evaluate_array(e: Expr, x, y) -> np.ndarray:
    """Vectorized evaluation with domain checking at every node.

    Overflow to +-inf is allowed and propagates; genuine domain violations
    raise ``ExprDomainError`` naming the offending subexpression and the
    first offending point.
    """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    with np.errstate(all="ignore"):
        out = _interp(e, x, y)
    return np.array(np.broadcast_to(out, x.shape), dtype=float)


def evaluate(e: Expr, p: tuple[float, float]) -> float:
    """Evaluate at a single point; the result must be finite."""
    x, y = float(p[0]), float(p[1])
    value = float(evaluate_array(e, x, y))
    if not math.isfinite(value):
        raise ExprDomainError("non-finite result", e, (x, y))
    return value


def _codegen(e: Expr) -> str:
    if isinstance(e, Const):
        return repr(float(e.value))
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            return f"(-{_codegen(e.arg)})"
        return f"_f_{e.op}({_codegen(e.arg)})"
    if e.op == "^":
        return f"_pow({_codegen(e.left)}, {_codegen(e.right)})"
    return f"({_codegen(e.left)} {e.op} {_codegen(e.right)})"


def compile_expr(e: Expr) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Return a fast vectorized ``f(x, y)``.

    The compiled function runs with numpy floating point errors raised;
    on any such error it falls back to :func:`evaluate_array`, which
    either reports the domain violation precisely or returns the
    (overflowed) values.
    """
    env = {f"_f_{k}": v for k, v in _NP_FUNCS.items()}
    env["_pow"] = np.power
    raw = eval(f"lambda x, y: {_codegen(e)}", env)  # noqa: S307 - source is generated from a validated AST

    def f(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        try:
            with np.errstate(divide="raise", invalid="raise", over="ignore", under="ignore"):
                out = raw(x, y)
        except FloatingPointError:
            return evaluate_array(e, x, y)
        shape = np.broadcast(x, y).shape
        if np.shape(out) != shape:
            out = np.broadcast_to(out, shape).astype(float, copy=True)
        return out

    return f


# --------------------------------------------------------------------------
# Smart constructors (constant folding and 0/1 identities only)


def const(v: float) -> Const:
    return Const(float(v))


def _is(e: Expr, v: float) -> bool:
    return isinstance(e, Const) and e.value == v


def neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    return Binary("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return neg(b)
    return Binary("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is(a, 0.0) or _is(b, 0.0):
        return Const(0.0)
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if _is(a, -1.0):
        return neg(b)
    if _is(b, -1.0):
        return neg(a)
    return Binary("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0:
        return Const(a.value / b.value)
    if _is(a, 0.0) and not _is(b, 0.0):
        return Const(0.0)
    if _is(b, 1.0):
        return a
    return Binary("/", a, b)


def power(a: Expr, c: float) -> Expr:
    c = float(c)
    if c == 0.0:
        return Const(1.0)
    if c == 1.0:
        return a
    if isinstance(a, Const):
        with np.errstate(all="ignore"):
            v = float(np.power(a.value, c))
        if math.isfinite(v):
            return Const(v)
    return Binary("^", a, Const(c))


def func(name: str, a: Expr) -> Expr:
    if isinstance(a, Const):
        with np.errstate(all="ignore"):
            v = float(_NP_FUNCS[name](a.value))
        if math.isfinite(v):
            return Const(v)
    return Unary(name, a)


# --------------------------------------------------------------------------
# Differentiation


def diff(e: Expr, var: str) -> Expr:
    """Symbolic partial derivative of ``e`` with respect to ``var``."""
    if var not in VARIABLES:
        raise ExprError(f"cannot differentiate with respect to {var!r}")
    if isinstance(e, Const):
        return Const(0.0)
    if isinstance(e, Var):
        return Const(1.0 if e.name == var else 0.0)
    if isinstance(e, Unary):
        a = e.arg
        da = diff(a, var)
        if _is(da, 0.0):
            return Const(0.0)
        if e.op == "neg":
            return neg(da)
        if e.op == "exp":
            return mul(e, da)
        if e.op == "log":
            return div(da, a)
        if e.op == "sqrt":
            return div(da, mul(Const(2.0), e))
        if e.op == "sin":
            return mul(func("cos", a), da)
        if e.op == "cos":
            return neg(mul(func("sin", a), da))
        if e.op == "atan":
            return div(da, add(Const(1.0), power(a, 2.0)))
        raise ExprError(f"unknown function {e.op!r}")
    a, b = e.left, e.right
    if e.op == "+":
        return add(diff(a, var), diff(b, var))
    if e.op == "-":
        return sub(diff(a, var), diff(b, var))
    if e.op == "*":
        return add(mul(diff(a, var), b), mul(a, diff(b, var)))
    if e.op == "/":
        return div(sub(mul(diff(a, var), b), mul(a, diff(b, var))), power(b, 2.0))
    c = b.value  # type: ignore[union-attr]
    return mul(mul(Const(c), power(a, c - 1.0)), diff(a, var))
