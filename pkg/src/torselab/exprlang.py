"""A small expression language over chart coordinates.

Expressions are parsed into an immutable AST and evaluated either on plain
floats or on :class:`Dual` numbers, which carry the exact gradient with
respect to the chart coordinates.

Grammar (``^`` binds tighter than unary minus, and is right-associative)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'

Identifiers are ``x1`` .. ``x9`` (coordinates), ``pi`` and ``e`` (constants),
a function name, or anything else, which is a named parameter.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Iterator, Mapping, Sequence, Union

import numpy as np

from torselab.errors import (
    DomainError,
    ExprSyntaxError,
    UnboundParameter,
    UnknownFunction,
    UnknownVariable,
)

FUNCTIONS = ("sin", "cos", "tan", "cot", "exp", "ln", "sqrt", "abs")
CONSTANTS = {"pi": math.pi, "e": math.e}
_COORD = re.compile(r"x([1-9])\Z")


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Var:
    """Chart coordinate; ``index`` is 1-based as in ``x1``."""

    index: int


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Const, Var, Param, Neg, BinOp, Call]


def walk(e: Expr) -> Iterator[Expr]:
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, Neg):
            stack.append(node.operand)
        elif isinstance(node, BinOp):
            stack.extend((node.right, node.left))
        elif isinstance(node, Call):
            stack.append(node.arg)


def max_var_index(e: Expr) -> int:
    return max((n.index for n in walk(e) if isinstance(n, Var)), default=0)


def param_names(e: Expr) -> set[str]:
    return {n.name for n in walk(e) if isinstance(n, Param)}


def substitute(e: Expr, names: Mapping[str, Expr]) -> Expr:
    """Replace ``Param`` nodes whose name is in ``names``."""
    if isinstance(e, Param):
        return names.get(e.name, e)
    if isinstance(e, Neg):
        return Neg(substitute(e.operand, names))
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, names), substitute(e.right, names))
    if isinstance(e, Call):
        return Call(e.func, substitute(e.arg, names))
    return e


def bind(e: Expr, params: Mapping[str, float]) -> Expr:
    """Freeze scalar parameters into numeric literals."""
    return substitute(e, {k: Num(float(v)) for k, v in params.items()})


# Small constructors used when metrics are assembled programmatically.


def num(v: float) -> Expr:
    v = float(v)
    return Neg(Num(-v)) if v < 0 else Num(v)


def add(a: Expr, b: Expr) -> Expr:
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    return BinOp("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    return BinOp("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    return BinOp("/", a, b)


def call(func: str, arg: Expr) -> Call:
    return Call(func, arg)


def total(terms: Sequence[Expr]) -> Expr:
    terms = list(terms)
    if not terms:
        return Num(0.0)
    acc = terms[0]
    for t in terms[1:]:
        acc = add(acc, t)
    return acc


# ---------------------------------------------------------------------------
# Tokenizer and parser
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # num, ident, op, end
    text: str
    line: int
    col: int


def _tokenize(source: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None:
            raise ExprSyntaxError(
                f"unexpected character {source[pos]!r}", line, pos - line_start + 1
            )
        kind = m.lastgroup
        text = m.group()
        if kind == "ws":
            for i, ch in enumerate(text):
                if ch == "\n":
                    line += 1
                    line_start = pos + i + 1
        else:
            toks.append(_Tok(kind, text, line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("end", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, source: str, dim: int | None, params: set[str] | None):
        self.toks = _tokenize(source)
        self.i = 0
        self.dim = dim
        self.params = params

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def fail(self, expected: str) -> ExprSyntaxError:
        t = self.tok
        found = "end of input" if t.kind == "end" else repr(t.text)
        return ExprSyntaxError(f"unexpected {found}", t.line, t.col, expected)

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            raise self.fail("operator or end of input")
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            left = BinOp(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            left = BinOp(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.accept("-"):
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.accept("^"):
            return BinOp("^", base, self.unary())
        return base

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Num(float(t.text))
        if t.kind == "ident":
            self.i += 1
            if self.accept("("):
                if t.text not in FUNCTIONS:
                    raise UnknownFunction(
                        f"unknown function {t.text!r} at line {t.line}, col {t.col}"
                    )
                arg = self.expr()
                if not self.accept(")"):
                    raise self.fail("')'")
                return Call(t.text, arg)
            return self.identifier(t)
        if self.accept("("):
            e = self.expr()
            if not self.accept(")"):
                raise self.fail("')'")
            return e
        raise self.fail("number, identifier or '('")

    def identifier(self, t: _Tok) -> Expr:
        name = t.text
        if name in FUNCTIONS:
            raise self.fail("'(' after function name")
        m = _COORD.match(name)
        if m:
            idx = int(m.group(1))
            if self.dim is not None and idx > self.dim:
                raise UnknownVariable(
                    f"coordinate {name} exceeds chart dimension {self.dim} "
                    f"(line {t.line}, col {t.col})"
                )
            return Var(idx)
        if name in CONSTANTS:
            return Const(name)
        if self.params is not None and name not in self.params:
            raise UnknownVariable(f"undeclared name {name!r} at line {t.line}, col {t.col}")
        return Param(name)


def parse(source: str, dim: int | None = None, params: set[str] | None = None) -> Expr:
    """Parse ``source`` into an AST.

    When ``dim`` is given, coordinates beyond it raise ``UnknownVariable``; when
    ``params`` is given, any other free name not in it does too.
    """
    return _Parser(source, dim, params).parse()


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}
_NEG, _POW, _ATOM = 3, 4, 5


def _fmt_num(v: float) -> str:
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _show(e: Expr) -> tuple[str, int]:
    if isinstance(e, Num):
        return _fmt_num(e.value), _ATOM
    if isinstance(e, Const):
        return e.name, _ATOM
    if isinstance(e, Var):
        return f"x{e.index}", _ATOM
    if isinstance(e, Param):
        return e.name, _ATOM
    if isinstance(e, Call):
        return f"{e.func}({_show(e.arg)[0]})", _ATOM
    if isinstance(e, Neg):
        return "-" + _wrap(e.operand, _NEG), _NEG
    if e.op == "^":
        return f"{_wrap(e.left, _ATOM)}^{_wrap(e.right, _NEG)}", _POW
    p = _PREC[e.op]
    return f"{_wrap(e.left, p)} {e.op} {_wrap(e.right, p + 1)}", p


def _wrap(e: Expr, min_prec: int) -> str:
    s, p = _show(e)
    return s if p >= min_prec else f"({s})"


def to_source(e: Expr) -> str:
    """Render an AST back to source text that parses to the same tree."""
    return _show(e)[0]


# ---------------------------------------------------------------------------
# Dual numbers
# ---------------------------------------------------------------------------


class Dual:
    """Value plus exact gradient with respect to the chart coordinates.

    Treated as immutable: every operation returns a new instance.
    """

    __slots__ = ("value", "grad")

    def __init__(self, value: float, grad: np.ndarray):
        self.value = float(value)
        self.grad = grad

    @classmethod
    def constant(cls, value: float, n: int) -> "Dual":
        return cls(value, np.zeros(n))

    @classmethod
    def variable(cls, value: float, index: int, n: int) -> "Dual":
        g = np.zeros(n)
        g[index] = 1.0
        return cls(value, g)

    @staticmethod
    def _lift(other, n: int) -> "Dual":
        if isinstance(other, Dual):
            return other
        return Dual(float(other), np.zeros(n))

    def __repr__(self) -> str:
        return f"Dual({self.value!r}, {self.grad.tolist()!r})"

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value + other.value, self.grad + other.grad)
        return Dual(self.value + other, self.grad)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.value - other.value, self.grad - other.grad)
        return Dual(self.value - other, self.grad)

    def __rsub__(self, other):
        return Dual(other - self.value, -self.grad)

    def __neg__(self):
        return Dual(-self.value, -self.grad)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(
                self.value * other.value,
                self.value * other.grad + other.value * self.grad,
            )
        return Dual(self.value * other, self.grad * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._lift(other, len(self.grad))
        if other.value == 0.0:
            raise DomainError("division by zero")
        q = self.value / other.value
        return Dual(q, (self.grad - q * other.grad) / other.value)

    def __rtruediv__(self, other):
        return self._lift(other, len(self.grad)) / self

    def __pow__(self, other):
        return dual_pow(self, self._lift(other, len(self.grad)))

    def __rpow__(self, other):
        return dual_pow(self._lift(other, len(self.grad)), self)

    def chain(self, value: float, slope: float) -> "Dual":
        """Apply a unary function with the given value and derivative."""
        return Dual(value, slope * self.grad)


def dual_pow(u: Dual, v: Dual) -> Dual:
    if not v.grad.any():
        k = v.value
        if u.value > 0.0 or k.is_integer():
            if u.value == 0.0 and k < 1.0 and k != 0.0:
                raise DomainError(f"0 raised to {k}")
            if k == 0.0:
                return Dual(1.0, np.zeros_like(u.grad))
            return u.chain(u.value**k, k * u.value ** (k - 1.0))
        raise DomainError(f"negative base {u.value} with non-integer exponent {k}")
    if u.value <= 0.0:
        raise DomainError("variable exponent requires a positive base")
    val = u.value**v.value
    logu = math.log(u.value)
    return Dual(val, val * (v.grad * logu + v.value * u.grad / u.value))


def _f_sin(x: float) -> float:
    return math.sin(x)


def _f_cos(x: float) -> float:
    return math.cos(x)


def _f_tan(x: float) -> float:
    c = math.cos(x)
    if c == 0.0:
        raise DomainError(f"tan pole at {x}")
    return math.sin(x) / c


def _f_cot(x: float) -> float:
    s = math.sin(x)
    if s == 0.0:
        raise DomainError(f"cot pole at {x}")
    return math.cos(x) / s


def _f_exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError as exc:
        raise DomainError(f"exp overflow at {x}") from exc


def _f_ln(x: float) -> float:
    if x <= 0.0:
        raise DomainError(f"ln of non-positive value {x}")
    return math.log(x)


def _f_sqrt(x: float) -> float:
    if x < 0.0:
        raise DomainError(f"sqrt of negative value {x}")
    return math.sqrt(x)


_FLOAT_FUNCS: dict[str, Callable[[float], float]] = {
    "sin": _f_sin,
    "cos": _f_cos,
    "tan": _f_tan,
    "cot": _f_cot,
    "exp": _f_exp,
    "ln": _f_ln,
    "sqrt": _f_sqrt,
    "abs": abs,
}


def _d_sin(u: Dual) -> Dual:
    return u.chain(math.sin(u.value), math.cos(u.value))


def _d_cos(u: Dual) -> Dual:
    return u.chain(math.cos(u.value), -math.sin(u.value))


def _d_tan(u: Dual) -> Dual:
    t = _f_tan(u.value)
    return u.chain(t, 1.0 + t * t)


def _d_cot(u: Dual) -> Dual:
    # cos/sin, so the pole sits where sin vanishes
    s = math.sin(u.value)
    if s == 0.0:
        raise DomainError(f"cot pole at {u.value}")
    return u.chain(math.cos(u.value) / s, -1.0 / (s * s))


def _d_exp(u: Dual) -> Dual:
    v = _f_exp(u.value)
    return u.chain(v, v)


def _d_ln(u: Dual) -> Dual:
    return u.chain(_f_ln(u.value), 1.0 / u.value)


def _d_sqrt(u: Dual) -> Dual:
    if u.value <= 0.0:
        raise DomainError(f"sqrt not differentiable at {u.value}")
    r = math.sqrt(u.value)
    return u.chain(r, 0.5 / r)


def _d_abs(u: Dual) -> Dual:
    return u.chain(abs(u.value), math.copysign(1.0, u.value) if u.value else 0.0)


_DUAL_FUNCS: dict[str, Callable[[Dual], Dual]] = {
    "sin": _d_sin,
    "cos": _d_cos,
    "tan": _d_tan,
    "cot": _d_cot,
    "exp": _d_exp,
    "ln": _d_ln,
    "sqrt": _d_sqrt,
    "abs": _d_abs,
}


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def _float_pow(a: float, b: float) -> float:
    if a == 0.0 and b < 0.0:
        raise DomainError("0 raised to a negative power")
    if a < 0.0 and not float(b).is_integer():
        raise DomainError(f"negative base {a} with non-integer exponent {b}")
    try:
        return a**b
    except OverflowError as exc:
        raise DomainError("power overflow") from exc


def _eval_float(e: Expr, p: Sequence[float], params: Mapping[str, float]) -> float:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return float(p[e.index - 1])
    if isinstance(e, BinOp):
        a = _eval_float(e.left, p, params)
        b = _eval_float(e.right, p, params)
        op = e.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if b == 0.0:
                raise DomainError("division by zero")
            return a / b
        return _float_pow(a, b)
    if isinstance(e, Call):
        return _FLOAT_FUNCS[e.func](_eval_float(e.arg, p, params))
    if isinstance(e, Neg):
        return -_eval_float(e.operand, p, params)
    if isinstance(e, Const):
        return CONSTANTS[e.name]
    if isinstance(e, Param):
        try:
            return float(params[e.name])
        except KeyError:
            raise UnboundParameter(f"parameter {e.name!r} is not bound") from None
    raise TypeError(f"not an expression node: {e!r}")


def _eval_dual(e: Expr, p: Sequence[float], params: Mapping[str, float], n: int):
    # constants come back as plain floats so that Dual arithmetic stays cheap
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        if e.index > n:
            raise UnknownVariable(f"x{e.index} used on a {n}-dimensional point")
        return Dual.variable(p[e.index - 1], e.index - 1, n)
    if isinstance(e, BinOp):
        a = _eval_dual(e.left, p, params, n)
        b = _eval_dual(e.right, p, params, n)
        op = e.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if isinstance(a, float) and isinstance(b, float):
                if b == 0.0:
                    raise DomainError("division by zero")
                return a / b
            return Dual._lift(a, n) / b
        if isinstance(a, float) and isinstance(b, float):
            return _float_pow(a, b)
        return dual_pow(Dual._lift(a, n), Dual._lift(b, n))
    if isinstance(e, Call):
        a = _eval_dual(e.arg, p, params, n)
        if isinstance(a, float):
            return _FLOAT_FUNCS[e.func](a)
        return _DUAL_FUNCS[e.func](a)
    if isinstance(e, Neg):
        return -_eval_dual(e.operand, p, params, n)
    if isinstance(e, Const):
        return CONSTANTS[e.name]
    if isinstance(e, Param):
        try:
            return float(params[e.name])
        except KeyError:
            raise UnboundParameter(f"parameter {e.name!r} is not bound") from None
    raise TypeError(f"not an expression node: {e!r}")


def evaluate(e: Expr, p: Sequence[float], params: Mapping[str, float] | None = None) -> float:
    return _eval_float(e, p, params or {})


def eval_dual(e: Expr, p: Sequence[float], params: Mapping[str, float] | None = None) -> Dual:
    """Value and exact coordinate gradient of ``e`` at ``p``."""
    n = len(p)
    r = _eval_dual(e, p, params or {}, n)
    return r if isinstance(r, Dual) else Dual.constant(r, n)
