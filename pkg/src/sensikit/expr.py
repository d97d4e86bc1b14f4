"""Expression trees over decision variables x and parameters p."""

import math
from dataclasses import dataclass

from . import dual
from .errors import DimensionError, DomainError

UNARY = ("neg", "sin", "cos", "exp", "log", "sqrt")
BINARY = ("add", "sub", "mul", "div", "pow")
_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}


@dataclass(frozen=True)
class Expr:
    """Immutable AST node.

    ``op`` is one of ``const``, ``var``, ``param``, a unary op or a binary op.
    ``value`` holds the constant for ``const`` and the zero-based index for
    ``var``/``param``.
    """

    op: str
    args: tuple = ()
    value: float = 0.0

    # construction helpers -------------------------------------------------
    @staticmethod
    def const(c):
        return Expr("const", (), float(c))

    @staticmethod
    def var(i):
        return Expr("var", (), int(i))

    @staticmethod
    def param(i):
        return Expr("param", (), int(i))

    def _bin(self, op, other):
        return Expr(op, (self, _lift(other)))

    def __add__(self, o):
        return self._bin("add", o)

    def __radd__(self, o):
        return _lift(o)._bin("add", self)

    def __sub__(self, o):
        return self._bin("sub", o)

    def __rsub__(self, o):
        return _lift(o)._bin("sub", self)

    def __mul__(self, o):
        return self._bin("mul", o)

    def __rmul__(self, o):
        return _lift(o)._bin("mul", self)

    def __truediv__(self, o):
        return self._bin("div", o)

    def __rtruediv__(self, o):
        return _lift(o)._bin("div", self)

    def __pow__(self, o):
        return self._bin("pow", o)

    def __neg__(self):
        return Expr("neg", (self,))

    def __str__(self):
        return to_text(self)


def _lift(o):
    return o if isinstance(o, Expr) else Expr.const(o)


def apply(fname, e):
    if fname not in UNARY:
        raise ValueError(f"unknown function {fname}")
    return Expr(fname, (_lift(e),))


def walk(e):
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(node.args)


def max_indices(e):
    """Largest (var, param) index referenced, -1 when absent."""
    nx = npar = -1
    for node in walk(e):
        if node.op == "var":
            nx = max(nx, node.value)
        elif node.op == "param":
            npar = max(npar, node.value)
    return nx, npar


def check_indices(e, n, ell):
    nx, npar = max_indices(e)
    if nx >= n or npar >= ell:
        raise DimensionError(f"expression {to_text(e)} references an index beyond n={n}, l={ell}")


def uses_params(e):
    return any(node.op == "param" for node in walk(e))


def x_degree(e):
    """Polynomial degree in x: 0, 1, or None when nonlinear in x.

    Parameters count as constants, so ``p1*x1`` is affine in x.
    """
    op = e.op
    if op in ("const", "param"):
        return 0
    if op == "var":
        return 1
    if op == "neg":
        return x_degree(e.args[0])
    if op in ("add", "sub"):
        a, b = x_degree(e.args[0]), x_degree(e.args[1])
        if a is None or b is None:
            return None
        return max(a, b)
    if op == "mul":
        a, b = x_degree(e.args[0]), x_degree(e.args[1])
        if a is None or b is None or a + b > 1:
            return None
        return a + b
    if op == "div":
        a, b = x_degree(e.args[0]), x_degree(e.args[1])
        if a is None or b != 0:
            return None
        return a
    # pow and transcendental functions: affine only when x-free
    if all(x_degree(c) == 0 for c in e.args):
        return 0
    return None


# -- printing --------------------------------------------------------------

def _fmt_const(c):
    if c == 0.0 and math.copysign(1.0, c) < 0:
        return "(-0)"
    if float(c).is_integer() and abs(c) < 1e15:
        s = str(int(c))
    else:
        s = repr(float(c))
    return f"({s})" if c < 0 else s


def to_text(e):
    """Fully parenthesized text; parsing it reproduces the same tree."""
    op = e.op
    if op == "const":
        return _fmt_const(e.value)
    if op == "var":
        return f"x{e.value + 1}"
    if op == "param":
        return f"p{e.value + 1}"
    if op == "neg":
        return f"(-{to_text(e.args[0])})"
    if op in UNARY:
        return f"{op}({to_text(e.args[0])})"
    a, b = e.args
    return f"({to_text(a)} {_SYMBOL[op]} {to_text(b)})"


# -- evaluation ------------------------------------------------------------

def _integer_exponent(e):
    if e.op == "const" and float(e.value).is_integer() and abs(e.value) <= 64:
        return int(e.value)
    if e.op == "neg" and e.args[0].op == "const":
        k = _integer_exponent(e.args[0])
        return None if k is None else -k
    return None


def evaluate(e, xs, ps):
    """Evaluate ``e`` with leaf values ``xs`` / ``ps`` (floats or duals)."""
    op = e.op
    if op == "const":
        return e.value
    if op == "var":
        return xs[e.value]
    if op == "param":
        return ps[e.value]
    if op == "pow":
        base = evaluate(e.args[0], xs, ps)
        k = _integer_exponent(e.args[1])
        if k is not None:
            if k < 0 and dual.real(base) == 0.0:
                raise DomainError("zero base with negative exponent", to_text(e))
            return dual.ipow(base, k)
        expo = evaluate(e.args[1], xs, ps)
        if dual.real(base) <= 0.0:
            raise DomainError("non-integer power of a non-positive base", to_text(e))
        return dual.exp(expo * dual.log(base))
    if op in UNARY:
        a = evaluate(e.args[0], xs, ps)
        if op == "neg":
            return -a
        if op in ("log", "sqrt") and dual.real(a) <= 0.0:
            raise DomainError(f"{op} of non-positive argument {dual.real(a)!r}", to_text(e))
        try:
            return getattr(dual, op)(a)
        except OverflowError:
            raise DomainError(f"{op} overflowed", to_text(e)) from None
    a = evaluate(e.args[0], xs, ps)
    b = evaluate(e.args[1], xs, ps)
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        if dual.real(b) == 0.0:
            raise DomainError("division by zero", to_text(e))
        return a / b
    raise ValueError(f"unknown op {op}")
