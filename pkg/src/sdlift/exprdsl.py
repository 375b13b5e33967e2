"""Arithmetic expression language for vector fields and observables.

Systems are written as lists of scalar expressions over indexed variables
(``x0``, ``x1``, ``u0``, ...).  The grammar, from loosest to tightest
binding::

    expr  := term (('+' | '-') term)*
    term  := unary (('*' | '/') unary)*
    unary := '-' unary | power
    power := atom ('^' unary)?
    atom  := number | var | func '(' expr ')' | '(' expr ')'

so ``-x0^3`` is ``-(x0^3)``, ``2^3^2`` is ``2^(3^2)`` and ``2^-1`` is
accepted.  Parsed trees are kept exactly as written (no constant folding) so
that printing and re-parsing gives back an equal tree.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DomainError, OutOfBoundsError, ParseError, UnknownFunctionError

__all__ = [
    "Expr", "Num", "Var", "Neg", "Add", "Sub", "Mul", "Div", "Pow", "Call",
    "FUNCTIONS", "parse_expr", "to_text", "eval_expr", "evaluate", "compile_expr",
    "variables_of", "ExprMap", "VectorField", "Observable", "grad_observable",
    "linear_form",
]


# --------------------------------------------------------------------------
# AST


class Expr:
    """Base class of expression tree nodes."""

    __slots__ = ()

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True, slots=True)
class Num(Expr):
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True, slots=True)
class Var(Expr):
    name: str
    index: int


@dataclass(frozen=True, slots=True)
class Neg(Expr):
    operand: Expr


@dataclass(frozen=True, slots=True)
class _Binary(Expr):
    left: Expr
    right: Expr


class Add(_Binary):
    __slots__ = ()
    symbol = "+"


class Sub(_Binary):
    __slots__ = ()
    symbol = "-"


class Mul(_Binary):
    __slots__ = ()
    symbol = "*"


class Div(_Binary):
    __slots__ = ()
    symbol = "/"


class Pow(_Binary):
    __slots__ = ()
    symbol = "^"


@dataclass(frozen=True, slots=True)
class Call(Expr):
    func: str
    arg: Expr


def _checked_log(a):
    if a <= 0.0:
        raise DomainError(f"log of non-positive value {a!r}")
    return math.log(a)


def _checked_sqrt(a):
    if a < 0.0:
        raise DomainError(f"sqrt of negative value {a!r}")
    return math.sqrt(a)


def _safe_exp(a):
    try:
        return math.exp(a)
    except OverflowError:
        return math.inf


def _trig(fn):
    def wrapped(a):
        try:
            return fn(a)
        except ValueError:
            raise DomainError(f"{fn.__name__} of {a!r}") from None

    return wrapped


FUNCTIONS: Mapping[str, Callable[[float], float]] = {
    "sin": _trig(math.sin),
    "cos": _trig(math.cos),
    "tan": _trig(math.tan),
    "exp": _safe_exp,
    "log": _checked_log,
    "sqrt": _checked_sqrt,
    "abs": abs,
    "tanh": math.tanh,
}

_BINARY = {"+": Add, "-": Sub, "*": Mul, "/": Div}


# --------------------------------------------------------------------------
# Parser

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)
_VAR_RE = re.compile(r"([A-Za-z_]+)(\d+)")
_ATOM_START = frozenset({"number", "identifier", "("})


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = []  # (kind, text, char offset)
        pos = 0
        while pos < len(source):
            m = _TOKEN_RE.match(source, pos)
            if m is None:
                raise ParseError(
                    f"unexpected character {source[pos]!r}",
                    self.byte_offset(pos),
                    _ATOM_START | {"-", "+", "*", "/", "^", ")"},
                )
            kind = m.lastgroup
            if kind != "ws":
                self.tokens.append((kind, m.group(), pos))
            pos = m.end()
        self.tokens.append(("end", "", len(source)))
        self.i = 0

    def byte_offset(self, char_pos):
        return len(self.source[:char_pos].encode("utf-8"))

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, expected, tok=None):
        kind, text, pos = tok or self.peek()
        what = "end of input" if kind == "end" else repr(text)
        raise ParseError(f"unexpected {what}", self.byte_offset(pos), expected)

    def expect_op(self, op):
        tok = self.peek()
        if tok[0] != "op" or tok[1] != op:
            self.fail({op})
        return self.advance()

    def parse(self):
        e = self.expr()
        if self.peek()[0] != "end":
            self.fail({"+", "-", "*", "/", "^", "end of input"})
        return e

    def expr(self):
        e = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.advance()[1]
            e = _BINARY[op](e, self.term())
        return e

    def term(self):
        e = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.advance()[1]
            e = _BINARY[op](e, self.unary())
        return e

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "^":
            self.advance()
            return Pow(base, self.unary())
        return base

    def atom(self):
        kind, text, pos = tok = self.peek()
        if kind == "num":
            self.advance()
            return Num(float(text))
        if kind == "op" and text == "(":
            self.advance()
            e = self.expr()
            self.expect_op(")")
            return e
        if kind == "ident":
            self.advance()
            nxt = self.peek()
            if nxt[0] == "op" and nxt[1] == "(":
                if text not in FUNCTIONS:
                    raise UnknownFunctionError(
                        f"unknown function {text!r}", self.byte_offset(pos), FUNCTIONS
                    )
                self.advance()
                arg = self.expr()
                self.expect_op(")")
                return Call(text, arg)
            m = _VAR_RE.fullmatch(text)
            if m is None:
                if text in FUNCTIONS:
                    self.fail({"("})
                raise ParseError(
                    f"{text!r} is not an indexed variable such as x0 or u1",
                    self.byte_offset(pos),
                    {"variable"},
                )
            return Var(m.group(1), int(m.group(2)))
        self.fail(_ATOM_START | {"-"}, tok)


def parse_expr(source: str) -> Expr:
    """Parse expression text into an :class:`Expr` tree.

    Raises :class:`ParseError` (with the byte offset of the offending token and
    the set of acceptable tokens) on malformed input, and
    :class:`UnknownFunctionError` for calls outside :data:`FUNCTIONS`.
    """
    if not isinstance(source, str):
        raise TypeError(f"expression source must be str, not {type(source).__name__}")
    if not source.strip():
        raise ParseError("empty expression", 0, _ATOM_START | {"-"})
    return _Parser(source).parse()


# --------------------------------------------------------------------------
# Printer

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def _prec(e):
    return _PREC.get(type(e), 5)


def to_text(e: Expr) -> str:
    """Render ``e`` with the minimum parentheses needed to re-parse it."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return f"{e.name}{e.index}"
    if isinstance(e, Call):
        return f"{e.func}({to_text(e.arg)})"
    if isinstance(e, Neg):
        inner = to_text(e.operand)
        return "-" + (f"({inner})" if _prec(e.operand) < 3 else inner)
    if isinstance(e, Pow):
        left, right = to_text(e.left), to_text(e.right)
        if _prec(e.left) <= 4:
            left = f"({left})"
        if _prec(e.right) < 3:
            right = f"({right})"
        return f"{left} ^ {right}"
    if isinstance(e, _Binary):
        p = _prec(e)
        left, right = to_text(e.left), to_text(e.right)
        if _prec(e.left) < p:
            left = f"({left})"
        if _prec(e.right) <= p:
            right = f"({right})"
        return f"{left} {e.symbol} {right}"
    raise TypeError(f"not an expression node: {e!r}")


# --------------------------------------------------------------------------
# Evaluation


def _div(a, b):
    if b == 0.0:
        raise DomainError("division by zero")
    return a / b


def _pow(a, b):
    if a == 0.0 and b < 0.0:
        raise DomainError(f"zero raised to negative power {b!r}")
    if a < 0.0 and not float(b).is_integer():
        raise DomainError(f"negative base {a!r} raised to non-integer power {b!r}")
    try:
        return a**b
    except OverflowError:
        if a < 0.0 and b % 2.0 == 1.0:
            return -math.inf
        return math.inf


def compile_expr(e: Expr) -> Callable[[Mapping[str, Sequence[float]]], float]:
    """Turn ``e`` into a closure taking an environment ``{name: vector}``."""
    if isinstance(e, Num):
        value = e.value
        return lambda env: value
    if isinstance(e, Var):
        name, index = e.name, e.index

        def lookup(env):
            try:
                return float(env[name][index])
            except (KeyError, IndexError):
                raise OutOfBoundsError(f"variable {name}{index} is out of bounds") from None

        return lookup
    if isinstance(e, Neg):
        inner = compile_expr(e.operand)
        return lambda env: -inner(env)
    if isinstance(e, Call):
        fn = FUNCTIONS[e.func]
        arg = compile_expr(e.arg)
        return lambda env: fn(arg(env))
    if isinstance(e, _Binary):
        a, b = compile_expr(e.left), compile_expr(e.right)
        if isinstance(e, Add):
            return lambda env: a(env) + b(env)
        if isinstance(e, Sub):
            return lambda env: a(env) - b(env)
        if isinstance(e, Mul):
            return lambda env: a(env) * b(env)
        if isinstance(e, Div):
            return lambda env: _div(a(env), b(env))
        return lambda env: _pow(a(env), b(env))
    raise TypeError(f"not an expression node: {e!r}")


def evaluate(e: Expr, env: Mapping[str, Sequence[float]]) -> float:
    return compile_expr(e)(env)


def eval_expr(e: Expr, x: Sequence[float], u: Sequence[float] = ()) -> float:
    """Evaluate ``e`` with state ``x`` bound to ``x<i>`` and input ``u`` to ``u<i>``."""
    return compile_expr(e)({"x": x, "u": u})


def variables_of(e: Expr) -> set[Var]:
    """All variable references appearing in ``e``."""
    if isinstance(e, Var):
        return {e}
    if isinstance(e, Neg):
        return variables_of(e.operand)
    if isinstance(e, Call):
        return variables_of(e.arg)
    if isinstance(e, _Binary):
        return variables_of(e.left) | variables_of(e.right)
    return set()


def linear_form(coeffs: Sequence[float], name: str) -> Expr:
    """Expression for ``sum_j coeffs[j] * <name>j``; zero coefficients are skipped."""
    terms = []
    for j, c in enumerate(coeffs):
        c = float(c)
        if c == 0.0:
            continue
        term = Mul(Num(abs(c)), Var(name, j))
        terms.append((c < 0.0, term))
    if not terms:
        return Num(0.0)
    negative, e = terms[0]
    if negative:
        e = Neg(e)
    for negative, term in terms[1:]:
        e = Sub(e, term) if negative else Add(e, term)
    return e


# --------------------------------------------------------------------------
# Vector-valued maps


@dataclass(frozen=True)
class ExprMap:
    """A vector of expressions over declared, fixed-length variable vectors.

    ``variables`` lists ``(name, length)`` pairs in the order the vectors are
    passed to :meth:`__call__`.  Every variable reference is checked against
    it at construction.
    """

    components: tuple[Expr, ...]
    variables: tuple[tuple[str, int], ...]
    _compiled: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        comps = tuple(parse_expr(c) if isinstance(c, str) else c for c in self.components)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "variables", tuple((n, int(d)) for n, d in self.variables))
        declared = dict(self.variables)
        for k, comp in enumerate(comps):
            for v in variables_of(comp):
                if v.name not in declared:
                    raise OutOfBoundsError(
                        f"component {k} references undeclared variable {v.name}{v.index}"
                    )
                if v.index >= declared[v.name]:
                    raise OutOfBoundsError(
                        f"component {k} references {v.name}{v.index} but "
                        f"{v.name} has length {declared[v.name]}"
                    )
        object.__setattr__(self, "_compiled", tuple(compile_expr(c) for c in comps))

    @property
    def dim(self) -> int:
        return len(self.components)

    def __call__(self, *vectors) -> np.ndarray:
        if len(vectors) != len(self.variables):
            raise TypeError(f"expected {len(self.variables)} vectors, got {len(vectors)}")
        env = {}
        for (name, n), vec in zip(self.variables, vectors):
            if len(vec) != n:
                raise OutOfBoundsError(f"{name} has length {len(vec)}, expected {n}")
            env[name] = vec
        return np.array([fn(env) for fn in self._compiled], dtype=float)

    def to_strings(self) -> list[str]:
        return [to_text(c) for c in self.components]


class VectorField(ExprMap):
    """Right-hand side ``f(x, u)`` of a state equation."""

    def __init__(self, components, dim_state: int, dim_input: int = 0):
        if dim_state < 1:
            raise ValueError("dim_state must be positive")
        if dim_input < 0:
            raise ValueError("dim_input must be non-negative")
        if len(components) != dim_state:
            raise OutOfBoundsError(
                f"vector field needs {dim_state} components, got {len(components)}"
            )
        super().__init__(tuple(components), (("x", dim_state), ("u", dim_input)))

    @property
    def dim_state(self) -> int:
        return self.variables[0][1]

    @property
    def dim_input(self) -> int:
        return self.variables[1][1]


class Observable(ExprMap):
    """Output map ``h(x)``; may not reference inputs."""

    def __init__(self, components, dim_state: int):
        if dim_state < 1:
            raise ValueError("dim_state must be positive")
        super().__init__(tuple(components), (("x", dim_state),))

    @property
    def dim_state(self) -> int:
        return self.variables[0][1]

    @property
    def dim_output(self) -> int:
        return self.dim


def grad_observable(h: Observable, x, step: float | None = None) -> np.ndarray:
    """Central-difference Jacobian of ``h`` at ``x``, shape ``(p, n)``.

    With ``step=None`` coordinate ``j`` uses ``1e-6 * max(1, |x_j|)``;
    otherwise ``step`` is used as an absolute increment for every coordinate.
    """
    x = np.asarray(x, dtype=float)
    if step is not None and not step > 0.0:
        raise ValueError("step must be positive")
    jac = np.empty((h.dim, x.size))
    for j in range(x.size):
        delta = 1e-6 * max(1.0, abs(x[j])) if step is None else float(step)
        xp = x.copy()
        xm = x.copy()
        xp[j] += delta
        xm[j] -= delta
        jac[:, j] = (h(xp) - h(xm)) / (xp[j] - xm[j])
    return jac
