"""Real-valued expression trees.

Nodes are immutable dataclasses.  Evaluation works on floats and on numpy
arrays alike and raises :class:`DomainError` as soon as any intermediate
value is non-finite, so ``1/inf`` style masking cannot hide an overflow.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

__all__ = [
    "DomainError",
    "ExpressionSyntaxError",
    "RbfConfig",
    "Const",
    "Var",
    "Binary",
    "Unary",
    "Expression",
    "FUNCTIONS",
    "evaluate",
    "differentiate",
    "simplify",
    "parse_expression",
    "print_expression",
    "variables",
    "size",
]

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "rbf1", "rbf2", "rbf3", "rbf4")
OPERATORS = ("+", "-", "*", "/")
VARIABLES = ("x", "y", "z")

# grammar files may spell the radial basis functions BRFn or RBFn
_FUNCTION_ALIASES = {name: name for name in FUNCTIONS}
for _i in range(1, 5):
    _FUNCTION_ALIASES[f"brf{_i}"] = f"rbf{_i}"


class DomainError(ArithmeticError):
    """Evaluation left the real domain (or hit an unbound variable)."""


class ExpressionSyntaxError(ValueError):
    pass


@dataclass(frozen=True)
class RbfConfig:
    c: float = 1.0

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ValueError(f"RBF shape constant must be positive, got {self.c}")


@dataclass(frozen=True)
class Const:
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        if not math.isfinite(self.value):
            raise ValueError("constants must be finite")


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Unary:
    fn: str
    arg: "Expression"


Expression = Union[Const, Var, Binary, Unary]

ZERO = Const(0.0)
ONE = Const(1.0)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def _checked(value, what):
    if not np.all(np.isfinite(value)):
        raise DomainError(f"non-finite value in {what}")
    return value


def _apply_unary(fn: str, r, c: float):
    if fn == "sin":
        return np.sin(r)
    if fn == "cos":
        return np.cos(r)
    if fn == "exp":
        return np.exp(r)
    if fn == "log":
        if np.any(r <= 0):
            raise DomainError("log of non-positive value")
        return np.log(r)
    if fn == "sqrt":
        if np.any(r < 0):
            raise DomainError("sqrt of negative value")
        return np.sqrt(r)
    if fn == "rbf1":
        return np.exp(-c * r * r)
    if fn == "rbf2":
        return np.sqrt(c * c + r * r)
    if fn == "rbf3":
        return np.sqrt(1.0 / (c * c + r * r))
    if fn == "rbf4":
        return 1.0 / (c * c + r * r)
    raise ValueError(f"unknown function {fn!r}")


def _eval(e, env, c):
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise DomainError(f"unbound variable {e.name!r}") from None
    if isinstance(e, Binary):
        a = _eval(e.left, env, c)
        b = _eval(e.right, env, c)
        if e.op == "+":
            out = a + b
        elif e.op == "-":
            out = a - b
        elif e.op == "*":
            out = a * b
        elif e.op == "/":
            if np.any(b == 0):
                raise DomainError("division by zero")
            out = a / b
        else:
            raise ValueError(f"unknown operator {e.op!r}")
        return _checked(out, e.op)
    if isinstance(e, Unary):
        return _checked(_apply_unary(e.fn, _eval(e.arg, env, c), c), e.fn)
    raise TypeError(f"not an expression: {e!r}")


def evaluate(e: Expression, env: Mapping[str, object], rbf: RbfConfig = RbfConfig()):
    """Evaluate ``e`` with variables bound by ``env``.

    Values in ``env`` may be floats or numpy arrays (broadcast together).
    Returns a float for scalar input, otherwise an array of the broadcast
    shape.
    """
    env = {k: np.asarray(v, dtype=float) for k, v in env.items()}
    with np.errstate(all="ignore"):
        out = _eval(e, env, rbf.c)
    shape = np.broadcast_shapes(*(v.shape for v in env.values())) if env else ()
    out = np.broadcast_to(np.asarray(out, dtype=float), shape)
    return float(out) if out.ndim == 0 else out.copy()


# ---------------------------------------------------------------------------
# construction helpers with local simplification
# ---------------------------------------------------------------------------


def _is(e, v):
    return isinstance(e, Const) and e.value == v


def _fold(value):
    value = float(value)
    return Const(value) if math.isfinite(value) else None


def add(a, b):
    if _is(a, 0):
        return b
    if _is(b, 0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold(np.float64(a.value) + b.value) or Binary("+", a, b)
    return Binary("+", a, b)


def sub(a, b):
    if _is(b, 0):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold(np.float64(a.value) - b.value) or Binary("-", a, b)
    return Binary("-", a, b)


def mul(a, b):
    if _is(a, 0) or _is(b, 0):
        return ZERO
    if _is(a, 1):
        return b
    if _is(b, 1):
        return a
    if isinstance(a, Const) and isinstance(b, Const):
        return _fold(np.float64(a.value) * b.value) or Binary("*", a, b)
    return Binary("*", a, b)


def div(a, b):
    if _is(b, 1):
        return a
    if isinstance(b, Const) and b.value != 0:
        if _is(a, 0):
            return ZERO
        if isinstance(a, Const):
            return _fold(np.float64(a.value) / b.value) or Binary("/", a, b)
    return Binary("/", a, b)


def neg(a):
    return mul(Const(-1.0), a)


_BUILD = {"+": add, "-": sub, "*": mul, "/": div}


def _fold_unary(fn, arg):
    # RBFs depend on the shape constant, so they are never folded here
    if isinstance(arg, Const) and fn in ("sin", "cos", "exp", "log", "sqrt"):
        try:
            with np.errstate(all="ignore"):
                v = _checked(_apply_unary(fn, np.float64(arg.value), 1.0), fn)
        except DomainError:
            return Unary(fn, arg)
        return Const(float(v))
    return Unary(fn, arg)


def simplify(e: Expression) -> Expression:
    """Constant folding plus the identities e+0, e*1, e*0, e-0, e/1, 0/c."""
    if isinstance(e, Binary):
        return _BUILD[e.op](simplify(e.left), simplify(e.right))
    if isinstance(e, Unary):
        return _fold_unary(e.fn, simplify(e.arg))
    return e


# ---------------------------------------------------------------------------
# differentiation
# ---------------------------------------------------------------------------


def differentiate(e: Expression, var: str = "x", rbf: RbfConfig = RbfConfig()) -> Expression:
    """Exact symbolic derivative of ``e`` with respect to ``var``."""
    return simplify(_d(e, var, rbf.c))


def _d(e, var, c):
    if isinstance(e, Const):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == var else ZERO
    if isinstance(e, Binary):
        u, v = e.left, e.right
        du, dv = _d(u, var, c), _d(v, var, c)
        if e.op == "+":
            return add(du, dv)
        if e.op == "-":
            return sub(du, dv)
        if e.op == "*":
            return add(mul(du, v), mul(u, dv))
        if e.op == "/":
            if _is(dv, 0):
                return div(du, v)
            return div(sub(mul(du, v), mul(u, dv)), mul(v, v))
        raise ValueError(f"unknown operator {e.op!r}")
    if isinstance(e, Unary):
        r = e.arg
        dr = _d(r, var, c)
        if _is(dr, 0):
            return ZERO
        fn = e.fn
        if fn == "sin":
            outer = Unary("cos", r)
        elif fn == "cos":
            outer = neg(Unary("sin", r))
        elif fn == "exp":
            outer = e
        elif fn == "log":
            return div(dr, r)
        elif fn == "sqrt":
            return div(dr, mul(Const(2.0), e))
        elif fn == "rbf1":
            # d/dr exp(-c r^2) = -2 c r exp(-c r^2)
            outer = mul(mul(Const(-2.0 * c), r), e)
        elif fn == "rbf2":
            # d/dr sqrt(c^2 + r^2) = r / sqrt(c^2 + r^2)
            outer = div(r, e)
        elif fn == "rbf3":
            # d/dr (c^2 + r^2)^(-1/2) = -r (c^2 + r^2)^(-3/2)
            outer = neg(mul(mul(r, e), Unary("rbf4", r)))
        elif fn == "rbf4":
            # d/dr (c^2 + r^2)^(-1) = -2 r (c^2 + r^2)^(-2)
            outer = mul(mul(Const(-2.0), r), mul(e, e))
        else:
            raise ValueError(f"unknown function {fn!r}")
        return mul(outer, dr)
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# printing and parsing
# ---------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _format_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def print_expression(e: Expression) -> str:
    """Infix text with only the parentheses that precedence requires."""
    if isinstance(e, Const):
        return _format_number(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unary):
        return f"{e.fn}({print_expression(e.arg)})"
    if isinstance(e, Binary):
        p = _PREC[e.op]
        left = print_expression(e.left)
        right = print_expression(e.right)
        if isinstance(e.left, Binary) and _PREC[e.left.op] < p:
            left = f"({left})"
        # left associative parse: equal precedence on the right needs parens
        if (isinstance(e.right, Binary) and _PREC[e.right.op] <= p) or (
            isinstance(e.right, Const) and e.right.value < 0
        ):
            right = f"({right})"
        return f"{left}{e.op}{right}"
    raise TypeError(f"not an expression: {e!r}")


_LEX_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/()]))"
)


def _lex(text):
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _LEX_RE.match(text, pos)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character at {pos}: {text[pos:]!r}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _lex(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None, len(self.text))

    def take(self, value=None):
        tok = self.peek()
        if tok[0] is None or (value is not None and tok[1] != value):
            want = repr(value) if value else "a token"
            raise ExpressionSyntaxError(f"expected {want} at {tok[2]} in {self.text!r}")
        self.i += 1
        return tok

    def parse(self):
        if not self.tokens:
            raise ExpressionSyntaxError("empty expression")
        e = self.sum()
        if self.i != len(self.tokens):
            raise ExpressionSyntaxError(f"trailing input at {self.peek()[2]} in {self.text!r}")
        return e

    def sum(self):
        e = self.product()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            e = Binary(op, e, self.product())
        return e

    def product(self):
        e = self.primary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            e = Binary(op, e, self.primary())
        return e

    def primary(self):
        kind, value, pos = self.peek()
        if kind == "num":
            self.take()
            return Const(float(value))
        if kind == "op" and value == "-":
            # only negative literals; the printer emits no other unary minus
            self.take()
            kind, value, pos = self.take()
            if kind != "num":
                raise ExpressionSyntaxError(f"unary minus must precede a number at {pos}")
            return Const(-float(value))
        if kind == "op" and value == "(":
            self.take()
            e = self.sum()
            self.take(")")
            return e
        if kind == "name":
            self.take()
            if self.peek()[1] == "(":
                fn = _FUNCTION_ALIASES.get(value.lower())
                if fn is None:
                    raise ExpressionSyntaxError(f"unknown function {value!r}")
                self.take("(")
                arg = self.sum()
                self.take(")")
                return Unary(fn, arg)
            if value in VARIABLES:
                return Var(value)
            raise ExpressionSyntaxError(f"unknown name {value!r} at {pos}")
        raise ExpressionSyntaxError(f"unexpected {value!r} at {pos} in {self.text!r}")


def parse_expression(text: str) -> Expression:
    """Parse infix text; ``*`` and ``/`` bind tighter than ``+`` and ``-``."""
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# misc
# ---------------------------------------------------------------------------


def variables(e: Expression) -> frozenset[str]:
    if isinstance(e, Var):
        return frozenset([e.name])
    if isinstance(e, Binary):
        return variables(e.left) | variables(e.right)
    if isinstance(e, Unary):
        return variables(e.arg)
    return frozenset()


def size(e: Expression) -> int:
    if isinstance(e, Binary):
        return 1 + size(e.left) + size(e.right)
    if isinstance(e, Unary):
        return 1 + size(e.arg)
    return 1
