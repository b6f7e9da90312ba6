"""A small closed-form language for complex fields and maps.

Grammar (lowest to highest precedence)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' powexp)?
    powexp := '-' powexp | power
    atom   := NUMBER ['i'] | 'i' | IDENT | FUNC '(' expr ')' | '(' expr ')'

``z`` and ``zeta`` name the independent variable; any other identifier is a
named complex parameter.  Exponents must be constant integers.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .errors import DivisionByZero, NotHolomorphic, ParseError, UnboundParameter

VARIABLES = frozenset({"z", "zeta"})
FUNCTIONS = ("conj", "exp", "re", "im", "abs", "sqrt")
_NON_HOLOMORPHIC = frozenset({"conj", "re", "im", "abs"})


# --- AST --------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: complex

    def __post_init__(self):
        object.__setattr__(self, "value", complex(self.value))


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Param:
    name: str


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
    exponent: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Param, Neg, BinOp, Pow, Call]


# --- lexer ------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?i?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    offset: int


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    pos = 0
    raw = src.encode()
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise ParseError(f"unexpected character {src[pos]!r}", len(src[:pos].encode()),
                             {"number", "identifier", "operator"})
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind if kind != "op" else m.group(), m.group(), len(src[:pos].encode())))
        pos = m.end()
    toks.append(_Tok("end", "", len(raw)))
    return toks


# --- parser -----------------------------------------------------------------

class _Parser:
    def __init__(self, src: str):
        self.toks = _tokenize(src)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, kind: str) -> _Tok:
        if self.tok.kind != kind:
            raise ParseError(f"unexpected {self.tok.text or 'end of input'!r}", self.tok.offset, {kind})
        return self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            raise ParseError(f"unexpected {self.tok.text!r}", self.tok.offset,
                             {"+", "-", "*", "/", "^", "end"})
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.tok.kind in ("+", "-"):
            op = self.advance().kind
            left = BinOp(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.tok.kind in ("*", "/"):
            op = self.advance().kind
            left = BinOp(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.tok.kind == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok.kind == "^":
            self.advance()
            start = self.tok.offset
            exponent = self.powexp()
            _check_integer_exponent(exponent, start)
            return Pow(base, exponent)
        return base

    def powexp(self) -> Expr:
        if self.tok.kind == "-":
            self.advance()
            return Neg(self.powexp())
        return self.power()

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "number":
            self.advance()
            if t.text.endswith("i"):
                return Num(complex(0.0, float(t.text[:-1])))
            return Num(float(t.text))
        if t.kind == "ident":
            self.advance()
            if t.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(t.text, arg)
            if t.text == "i":
                return Num(1j)
            if t.text in VARIABLES:
                return Var(t.text)
            return Param(t.text)
        if t.kind == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(f"unexpected {t.text or 'end of input'!r}", t.offset,
                         {"number", "identifier", "("})


def _check_integer_exponent(e: Expr, offset: int) -> None:
    if _free_names(e):
        raise ParseError("exponent must be a constant integer", offset, {"integer"})
    try:
        v = evaluate(e, 0.0, {})
    except DivisionByZero:
        raise ParseError("exponent must be a constant integer", offset, {"integer"}) from None
    if v.imag != 0 or v.real != round(v.real) or abs(v.real) > 64:
        raise ParseError("exponent must be a constant integer", offset, {"integer"})


def parse(src: str) -> Expr:
    """Parse ``src`` into an expression tree; raises :class:`ParseError`."""
    return _Parser(src).parse()


# --- printer ----------------------------------------------------------------

_ADD, _MUL, _NEG, _POW, _ATOM = 1, 2, 3, 4, 5


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _ADD if e.op in "+-" else _MUL
    if isinstance(e, Neg):
        return _NEG
    if isinstance(e, Pow):
        return _POW
    return _ATOM


def _fmt_num(v: complex) -> str:
    # Only non-negative real or imaginary literals come out of the parser; any
    # other value (from constant folding) is printed as a parenthesised sum.
    if v.imag == 0 and not np.signbit(v.imag):
        return repr(v.real) if not np.signbit(v.real) else f"(-{repr(-v.real)})"
    if v.real == 0 and not np.signbit(v.real):
        return repr(v.imag) + "i" if v.imag > 0 else f"(-{repr(-v.imag)}i)"
    sign = "+" if v.imag >= 0 else "-"
    return f"({repr(v.real)}{sign}{repr(abs(v.imag))}i)"


def to_source(e: Expr) -> str:
    def wrap(sub: Expr, min_prec: int) -> str:
        s = to_source(sub)
        return f"({s})" if _prec(sub) < min_prec else s

    if isinstance(e, Num):
        return _fmt_num(e.value)
    if isinstance(e, (Var, Param)):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({to_source(e.arg)})"
    if isinstance(e, Neg):
        return "-" + wrap(e.operand, _NEG)
    if isinstance(e, Pow):
        return wrap(e.base, _ATOM) + "^" + wrap(e.exponent, _NEG)
    if e.op in "+-":
        return f"{wrap(e.left, _ADD)} {e.op} {wrap(e.right, _MUL)}"
    return f"{wrap(e.left, _MUL)}{e.op}{wrap(e.right, _NEG)}"


# --- evaluation -------------------------------------------------------------

def _free_names(e: Expr) -> set[str]:
    if isinstance(e, (Var, Param)):
        return {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, (Neg, Call)):
        return _free_names(e.operand if isinstance(e, Neg) else e.arg)
    if isinstance(e, Pow):
        return _free_names(e.base) | _free_names(e.exponent)
    return _free_names(e.left) | _free_names(e.right)


def parameters(e: Expr) -> set[str]:
    return {n for n in _free_names(e) if n not in VARIABLES}


def depends_on_variable(e: Expr) -> bool:
    return bool(_free_names(e) & VARIABLES)


_FUNCS = {
    "conj": np.conj,
    "exp": np.exp,
    "re": lambda v: np.asarray(np.real(v), dtype=np.complex128),
    "im": lambda v: np.asarray(np.imag(v), dtype=np.complex128),
    "abs": lambda v: np.asarray(np.abs(v), dtype=np.complex128),
    "sqrt": np.sqrt,
}


def evaluate(e: Expr, z, params: Mapping[str, complex] | None = None):
    """Evaluate ``e`` at ``z`` (scalar or array) with the given parameter values."""
    params = params or {}
    z_arr = np.asarray(z, dtype=np.complex128)

    def ev(node):
        if isinstance(node, Num):
            return node.value
        if isinstance(node, Var):
            return z_arr
        if isinstance(node, Param):
            try:
                return complex(params[node.name])
            except KeyError:
                raise UnboundParameter(node.name) from None
        if isinstance(node, Neg):
            return -ev(node.operand)
        if isinstance(node, Call):
            return _FUNCS[node.func](ev(node.arg))
        if isinstance(node, Pow):
            n = int(round(complex(ev(node.exponent)).real))
            b = ev(node.base)
            if n < 0:
                zero = np.asarray(b) == 0
                if np.any(zero):
                    raise DivisionByZero(_first_point(z_arr, zero))
            return np.power(b, n) if n >= 0 else 1.0 / np.power(b, -n)
        a, b = ev(node.left), ev(node.right)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        zero = np.asarray(b) == 0
        if np.any(zero):
            raise DivisionByZero(_first_point(z_arr, zero))
        return a / b

    with np.errstate(over="ignore", invalid="ignore"):
        out = ev(e)
    if z_arr.ndim == 0:
        return complex(out)
    return np.broadcast_to(np.asarray(out, dtype=np.complex128), z_arr.shape).copy()


def _first_point(z_arr: np.ndarray, mask) -> complex:
    mask = np.broadcast_to(mask, z_arr.shape) if z_arr.ndim else mask
    if z_arr.ndim == 0:
        return complex(z_arr)
    idx = np.argwhere(mask)[0]
    return complex(z_arr[tuple(idx)])


def bind(e: Expr, params: Mapping[str, complex] | None = None):
    """Return ``fn(z)`` evaluating ``e`` with ``params`` fixed; checks binding eagerly."""
    params = dict(params or {})
    missing = parameters(e) - set(params)
    if missing:
        raise UnboundParameter(sorted(missing)[0])
    return lambda z: evaluate(e, z, params)


def parse_constant(src: str, params: Mapping[str, complex] | None = None) -> complex:
    e = parse(str(src))
    if depends_on_variable(e):
        raise ParseError("constant expected, found the variable", 0, {"constant"})
    return complex(evaluate(e, 0.0, params))


# --- symbolic derivative ----------------------------------------------------

def _num(e: Expr):
    return e.value if isinstance(e, Num) else None


def _add(a: Expr, b: Expr) -> Expr:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return Num(va + vb)
    if va == 0:
        return b
    if vb == 0:
        return a
    return BinOp("+", a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return Num(va - vb)
    if vb == 0:
        return a
    if va == 0:
        return _neg(b)
    return BinOp("-", a, b)


def _neg(a: Expr) -> Expr:
    va = _num(a)
    return Num(-va) if va is not None else Neg(a)


def _mul(a: Expr, b: Expr) -> Expr:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return Num(va * vb)
    if va == 0 or vb == 0:
        return Num(0)
    if va == 1:
        return b
    if vb == 1:
        return a
    return BinOp("*", a, b)


def _div(a: Expr, b: Expr) -> Expr:
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None and vb != 0:
        return Num(va / vb)
    if va == 0:
        return Num(0)
    if vb == 1:
        return a
    return BinOp("/", a, b)


def derivative(e: Expr) -> Expr:
    """Exact d/dz (or d/dζ) of a syntactically holomorphic expression."""
    if not depends_on_variable(e):
        return Num(0)
    if isinstance(e, Var):
        return Num(1)
    if isinstance(e, Neg):
        return _neg(derivative(e.operand))
    if isinstance(e, Call):
        if e.func in _NON_HOLOMORPHIC:
            raise NotHolomorphic(f"{e.func}(...) applied to the variable in {to_source(e)!r}")
        inner = derivative(e.arg)
        if e.func == "exp":
            return _mul(e, inner)
        # sqrt: principal branch, d sqrt(g) = g' / (2 sqrt(g))
        return _div(inner, _mul(Num(2), e))
    if isinstance(e, Pow):
        if depends_on_variable(e.exponent):
            raise NotHolomorphic("variable exponent")
        n = int(round(complex(evaluate(e.exponent, 0.0)).real))
        if n == 0:
            return Num(0)
        if n == 1:
            return derivative(e.base)
        lowered = e.base if n == 2 else Pow(e.base, Num(n - 1))
        return _mul(_mul(Num(n), lowered), derivative(e.base))
    da, db = derivative(e.left), derivative(e.right)
    if e.op == "+":
        return _add(da, db)
    if e.op == "-":
        return _sub(da, db)
    if e.op == "*":
        return _add(_mul(da, e.right), _mul(e.left, db))
    # quotient rule
    return _div(_sub(_mul(da, e.right), _mul(e.left, db)), Pow(e.right, Num(2)))


def check_holomorphic(e: Expr) -> None:
    """Raise :class:`NotHolomorphic` if a non-holomorphic node touches the variable."""
    derivative(e)
