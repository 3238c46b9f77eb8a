"""Profile functions H(u, x1..xn): parsing, evaluation and exact differentiation.

Two kinds of profile are supported:

* ``Symbolic`` wraps an expression tree parsed from text such as
  ``"c*exp(a1*x1 - a2*x2)"``; derivatives are taken on the tree.
* ``QuadraticForm`` is ``H = 1/2 x^T S(u) x`` for a matrix valued map ``S``,
  optionally with its exact derivative ``S_dot``.

Variable tags used by :meth:`ProfileFunction.derive` are ``"u"`` and
``"x1"`` .. ``"xn"`` (integers ``1..n`` are accepted for the x's).
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np

FUNCTIONS = ("exp", "log", "sin", "cos", "sinh", "cosh", "sqrt", "atan")


class ExprError(Exception):
    pass


class ParseError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class DomainError(ExprError, ArithmeticError):
    """Evaluation left the real domain of an operation (log(-1), 1/0, ...)."""


class DerivativeMapRequired(ExprError):
    pass


# --------------------------------------------------------------------------
# expression tree


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Call]

ZERO = Num(0.0)
ONE = Num(1.0)


def variables(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, (Neg, Call)):
        return variables(e.arg)
    return variables(e.left) | variables(e.right)


def to_text(e: Expr) -> str:
    """Fully parenthesised text that parses back to the same tree."""
    if isinstance(e, Num):
        s = repr(float(e.value))
        return f"({s})" if e.value < 0 or s.startswith("-") else s
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_text(e.arg)})"
    if isinstance(e, Call):
        return f"{e.func}({to_text(e.arg)})"
    return f"({to_text(e.left)}{e.op}{to_text(e.right)})"


# --------------------------------------------------------------------------
# parser (recursive descent; precedence + - < * / < unary < ^)

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<id>[A-Za-z_]\w*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while True:
        m = _TOKEN.match(text, pos)
        if m is None:
            rest = text[pos:]
            if rest.strip() == "":
                break
            start = pos + len(rest) - len(rest.lstrip())
            raise ParseError(f"unexpected character {text[start]!r}", start)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, n: int, constants: Mapping[str, float]):
        self.tokens = _tokenize(text)
        self.i = 0
        self.n = n
        self.constants = constants

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, off = self.take()
        if val != value:
            raise ParseError(f"expected {value!r}", off)

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, off = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {val!r}", off)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            e = BinOp(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            e = BinOp(op, e, self.factor())
        return e

    def factor(self) -> Expr:
        kind, val, off = self.peek()
        if kind == "op" and val in ("-", "+"):
            self.take()
            arg = self.factor()
            if val == "+":
                return arg
            if isinstance(arg, Num):
                return Num(-arg.value)
            return Neg(arg)
        base = self.base()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            self.take()
            return BinOp("^", base, self.factor())
        return base

    def base(self) -> Expr:
        kind, val, off = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "id":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            if val == "u":
                return Var("u")
            m = re.fullmatch(r"x(\d+)", val)
            if m:
                idx = int(m.group(1))
                if not 1 <= idx <= self.n:
                    raise ParseError(f"variable {val} out of range for n={self.n}", off)
                return Var(val)
            if val in self.constants:
                return Num(float(self.constants[val]))
            raise ParseError(f"unbound name {val!r}", off)
        if kind == "end":
            raise ParseError("unexpected end of input", off)
        raise ParseError(f"unexpected {val!r}", off)


def parse_expr(text: str, n: int, constants: Mapping[str, float] | None = None) -> Expr:
    if n < 1:
        raise ValueError("n must be >= 1")
    return _Parser(text, n, constants or {}).parse()


def parse(text: str, n: int, constants: Mapping[str, float] | None = None) -> "Symbolic":
    """Parse ``text`` into a symbolic profile in ``n`` transverse variables."""
    return Symbolic(n, parse_expr(text, n, constants))


# --------------------------------------------------------------------------
# smart constructors used by differentiation (light constant folding only)


def _add(a: Expr, b: Expr) -> Expr:
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    return BinOp("+", a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if b == ZERO:
        return a
    if a == ZERO:
        return _neg(b)
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    return BinOp("-", a, b)


def _neg(a: Expr) -> Expr:
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _mul(a: Expr, b: Expr) -> Expr:
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    if isinstance(b, Num) and not isinstance(a, Num):
        a, b = b, a
    if isinstance(a, Num) and isinstance(b, BinOp) and b.op == "*" and isinstance(b.left, Num):
        return _mul(Num(a.value * b.left.value), b.right)
    return BinOp("*", a, b)


def _div(a: Expr, b: Expr) -> Expr:
    if a == ZERO:
        return ZERO
    if b == ONE:
        return a
    if isinstance(a, Num) and isinstance(b, Num) and b.value != 0:
        return Num(a.value / b.value)
    return BinOp("/", a, b)


def _pow(a: Expr, b: Expr) -> Expr:
    if b == ZERO:
        return ONE
    if b == ONE:
        return a
    return BinOp("^", a, b)


@lru_cache(maxsize=None)
def diff(e: Expr, var: str) -> Expr:
    """Exact derivative of ``e`` with respect to the variable ``var``."""
    if isinstance(e, Num):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == var else ZERO
    if var not in variables(e):
        return ZERO
    if isinstance(e, Neg):
        return _neg(diff(e.arg, var))
    if isinstance(e, Call):
        a = e.arg
        da = diff(a, var)
        f = e.func
        if f == "exp":
            outer = e
        elif f == "log":
            return _div(da, a)
        elif f == "sin":
            outer = Call("cos", a)
        elif f == "cos":
            outer = _neg(Call("sin", a))
        elif f == "sinh":
            outer = Call("cosh", a)
        elif f == "cosh":
            outer = Call("sinh", a)
        elif f == "sqrt":
            return _div(da, _mul(Num(2.0), e))
        elif f == "atan":
            return _div(da, _add(ONE, _mul(a, a)))
        else:  # pragma: no cover - guarded by the parser
            raise ExprError(f"unknown function {f}")
        return _mul(outer, da)
    op, a, b = e.op, e.left, e.right
    if op == "+":
        return _add(diff(a, var), diff(b, var))
    if op == "-":
        return _sub(diff(a, var), diff(b, var))
    if op == "*":
        return _add(_mul(diff(a, var), b), _mul(a, diff(b, var)))
    if op == "/":
        da, db = diff(a, var), diff(b, var)
        if db == ZERO:
            return _div(da, b)
        return _div(_sub(_mul(da, b), _mul(a, db)), _mul(b, b))
    # power
    da, db = diff(a, var), diff(b, var)
    if db == ZERO:
        if isinstance(b, Num):
            return _mul(_mul(b, _pow(a, Num(b.value - 1.0))), da)
        return _mul(_mul(b, _pow(a, _sub(b, ONE))), da)
    if da == ZERO:
        return _mul(_mul(e, Call("log", a)), db)
    return _mul(e, _add(_mul(db, Call("log", a)), _div(_mul(b, da), a)))


# --------------------------------------------------------------------------
# evaluation: trees are compiled once into nested closures


def _guard(name: str, fn: Callable[[float], float], ok: Callable[[float], bool]):
    def f(v: float) -> float:
        if not ok(v):
            raise DomainError(f"{name}({v!r}) is outside the real domain")
        try:
            r = fn(v)
        except OverflowError as exc:
            raise DomainError(f"{name}({v!r}) overflows") from exc
        return r

    return f


_FUNCS = {
    "exp": _guard("exp", math.exp, lambda v: True),
    "log": _guard("log", math.log, lambda v: v > 0),
    "sin": _guard("sin", math.sin, math.isfinite),
    "cos": _guard("cos", math.cos, math.isfinite),
    "sinh": _guard("sinh", math.sinh, lambda v: True),
    "cosh": _guard("cosh", math.cosh, lambda v: True),
    "sqrt": _guard("sqrt", math.sqrt, lambda v: v >= 0),
    "atan": _guard("atan", math.atan, lambda v: True),
}


def _power(x: float, y: float) -> float:
    if x == 0.0 and y < 0:
        raise DomainError("0 raised to a negative power")
    if x < 0 and not float(y).is_integer():
        raise DomainError(f"({x!r})^{y!r} is not real")
    try:
        r = x**y
    except OverflowError as exc:
        raise DomainError(f"({x!r})^{y!r} overflows") from exc
    return float(r)


def _divide(x: float, y: float) -> float:
    if y == 0.0:
        raise DomainError("division by zero")
    return x / y


@lru_cache(maxsize=None)
def compile_expr(e: Expr) -> Callable[[Mapping[str, float]], float]:
    if isinstance(e, Num):
        v = e.value
        return lambda env: v
    if isinstance(e, Var):
        name = e.name
        return lambda env: env[name]
    if isinstance(e, Neg):
        g = compile_expr(e.arg)
        return lambda env: -g(env)
    if isinstance(e, Call):
        g = compile_expr(e.arg)
        f = _FUNCS[e.func]
        return lambda env: f(g(env))
    l, r = compile_expr(e.left), compile_expr(e.right)
    if e.op == "+":
        return lambda env: l(env) + r(env)
    if e.op == "-":
        return lambda env: l(env) - r(env)
    if e.op == "*":
        return lambda env: l(env) * r(env)
    if e.op == "/":
        return lambda env: _divide(l(env), r(env))
    return lambda env: _power(l(env), r(env))


# --------------------------------------------------------------------------
# profile functions


def parse_tags(tags: Iterable[Union[str, int]], n: int) -> tuple[tuple[int, ...], int]:
    """Normalise derivative tags to (sorted 0-based x indices, number of u's)."""
    xs: list[int] = []
    du = 0
    for t in tags:
        if t == "u":
            du += 1
            continue
        if isinstance(t, str):
            m = re.fullmatch(r"x(\d+)", t)
            if not m:
                raise ValueError(f"bad derivative tag {t!r}")
            t = int(m.group(1))
        if not 1 <= int(t) <= n:
            raise ValueError(f"derivative index {t} out of range for n={n}")
        xs.append(int(t) - 1)
    return tuple(sorted(xs)), du


def _tags(xs: Sequence[int], du: int) -> tuple:
    return tuple(f"x{i + 1}" for i in xs) + ("u",) * du


class ProfileFunction:
    """Base class: a scalar function H(u, x) on R x R^n."""

    n: int

    def __call__(self, u: float, x) -> float:
        raise NotImplementedError

    def derive(self, tags) -> "ProfileFunction":
        raise NotImplementedError

    @property
    def is_zero(self) -> bool:
        """True when the profile is *structurally* the zero function."""
        return False

    # cached partials --------------------------------------------------
    def _partial(self, xs: tuple[int, ...], du: int) -> "ProfileFunction":
        cache = self.__dict__.setdefault("_partials", {})
        key = (xs, du)
        p = cache.get(key)
        if p is None:
            p = self.derive(_tags(xs, du)) if (xs or du) else self
            cache[key] = p
        return p

    def partial(self, u: float, x, xs: Sequence[int] = (), du: int = 0) -> float:
        return self._partial(tuple(sorted(xs)), du)(u, x)

    def gradient(self, u: float, x) -> np.ndarray:
        return np.array([self._partial((i,), 0)(u, x) for i in range(self.n)])

    def hessian(self, u: float, x, du: int = 0) -> np.ndarray:
        n = self.n
        h = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                h[i, j] = h[j, i] = self._partial((i, j), du)(u, x)
        return h

    def third(self, u: float, x) -> np.ndarray:
        n = self.n
        t = np.empty((n, n, n))
        for i in range(n):
            for j in range(i, n):
                for k in range(j, n):
                    v = self._partial((i, j, k), 0)(u, x)
                    for p in {(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)}:
                        t[p] = v
        return t

    def u_derivative(self, u: float, x) -> float:
        return self._partial((), 1)(u, x)

    def tensor(self, u: float, x, k: int, du: int = 0):
        """All order-k x-derivatives (with du u-derivatives) as a symmetric k-tensor."""
        if k == 0:
            return self._partial((), du)(u, x)
        if k == 1:
            return np.array([self._partial((i,), du)(u, x) for i in range(self.n)])
        if k == 2:
            return self.hessian(u, x, du)
        n = self.n
        t = np.empty((n,) * k)
        for idx in itertools.combinations_with_replacement(range(n), k):
            v = self._partial(idx, du)(u, x)
            for perm in set(itertools.permutations(idx)):
                t[perm] = v
        return t

    def grad_u(self, u: float, x) -> np.ndarray:
        return np.array([self._partial((i,), 1)(u, x) for i in range(self.n)])


class Symbolic(ProfileFunction):
    def __init__(self, n: int, expr: Expr):
        if n < 1:
            raise ValueError("n must be >= 1")
        bad = {v for v in variables(expr) if v != "u" and not _is_x(v, n)}
        if bad:
            raise ValueError(f"expression uses variables outside u, x1..x{n}: {sorted(bad)}")
        self.n = n
        self.expr = expr
        self._fn = compile_expr(expr)

    def __repr__(self):
        return f"Symbolic(n={self.n}, {to_text(self.expr)})"

    def __str__(self):
        return to_text(self.expr)

    def __call__(self, u, x) -> float:
        env = {"u": float(u)}
        for i in range(self.n):
            env[f"x{i + 1}"] = float(x[i])
        v = self._fn(env)
        if not math.isfinite(v):
            raise DomainError(f"non-finite value {v} at u={u}, x={list(x)}")
        return v

    def derive(self, tags) -> "Symbolic":
        xs, du = parse_tags(tags, self.n)
        e = self.expr
        for i in xs:
            e = diff(e, f"x{i + 1}")
        for _ in range(du):
            e = diff(e, "u")
        return Symbolic(self.n, e)

    @property
    def is_zero(self) -> bool:
        return self.expr == ZERO


def _is_x(name: str, n: int) -> bool:
    m = re.fullmatch(r"x(\d+)", name)
    return bool(m) and 1 <= int(m.group(1)) <= n


class QuadraticForm(ProfileFunction):
    """H = 1/2 x^T S(u) x, together with its partial derivatives.

    ``S_dot`` must be the exact derivative of ``S``; it is needed for any
    u-derivative unless ``constant=True``.
    """

    def __init__(
        self,
        n: int,
        S: Callable[[float], np.ndarray],
        S_dot: Callable[[float], np.ndarray] | None = None,
        constant: bool = False,
        _xs: tuple[int, ...] = (),
        _du: int = 0,
    ):
        self.n = n
        self.S = S
        self.S_dot = S_dot
        self.constant = constant
        self._xs = _xs
        self._du = _du

    @classmethod
    def constant_matrix(cls, S) -> "QuadraticForm":
        S = np.array(S, dtype=float)
        return cls(S.shape[0], lambda u: S, lambda u: np.zeros_like(S), constant=True)

    def matrix(self, u: float) -> np.ndarray:
        S = np.asarray(self.S(u), dtype=float)
        if S.shape != (self.n, self.n):
            raise ValueError(f"S(u) has shape {S.shape}, expected {(self.n, self.n)}")
        if np.max(np.abs(S - S.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(S))):
            raise ValueError(f"S({u}) is not symmetric")
        return S

    def _coeff(self, u: float) -> np.ndarray:
        if self._du == 0:
            return self.matrix(u)
        if self._du == 1:
            if self.S_dot is None:
                if self.constant:
                    return np.zeros((self.n, self.n))
                raise DerivativeMapRequired("derivative map required: QuadraticForm has no S_dot")
            return np.asarray(self.S_dot(u), dtype=float)
        if self.constant:
            return np.zeros((self.n, self.n))
        raise DerivativeMapRequired("second u-derivatives of a QuadraticForm are not available")

    def __call__(self, u, x) -> float:
        k = len(self._xs)
        if k >= 3:
            return 0.0
        M = self._coeff(u)
        x = np.asarray(x, dtype=float)
        if k == 0:
            return 0.5 * float(x @ M @ x)
        if k == 1:
            return float(M[self._xs[0]] @ x)
        return float(M[self._xs[0], self._xs[1]])

    def derive(self, tags) -> "QuadraticForm":
        xs, du = parse_tags(tags, self.n)
        du = self._du + du
        if du >= 1 and self.S_dot is None and not self.constant:
            raise DerivativeMapRequired("derivative map required: QuadraticForm has no S_dot")
        return QuadraticForm(
            self.n, self.S, self.S_dot, self.constant, tuple(sorted(self._xs + xs)), du
        )

    @property
    def is_zero(self) -> bool:
        return len(self._xs) >= 3 or (self.constant and self._du >= 1)


def eval_profile(p: ProfileFunction, u: float, x) -> float:
    return p(u, x)


def derive(p: ProfileFunction, multi_index) -> ProfileFunction:
    return p.derive(multi_index)
