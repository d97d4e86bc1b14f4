"""Forward-mode dual numbers that nest.

``Dual(a, b)`` represents ``a + b*eps`` with ``eps**2 = 0``. The real part
``a`` and the tangent ``b`` may themselves be duals, so ``Dual(Dual(.), Dual(.))``
carries second-order truncated Taylor information (forward-over-forward).
Innermost tangents may be numpy vectors, which lets a single pass carry a
whole gradient.
"""

import math

import numpy as np


def real(v):
    """Innermost scalar value of a (possibly nested) dual."""
    while isinstance(v, Dual):
        v = v.a
    return v


class Dual:
    __slots__ = ("a", "b")
    # numpy must defer to our reflected operators instead of broadcasting.
    __array_ufunc__ = None

    def __init__(self, a, b):
        self.a = a
        self.b = b

    def __repr__(self):
        return f"Dual({self.a!r}, {self.b!r})"

    def __add__(self, o):
        if isinstance(o, Dual):
            return Dual(self.a + o.a, self.b + o.b)
        return Dual(self.a + o, self.b)

    __radd__ = __add__

    def __sub__(self, o):
        if isinstance(o, Dual):
            return Dual(self.a - o.a, self.b - o.b)
        return Dual(self.a - o, self.b)

    def __rsub__(self, o):
        return Dual(o - self.a, -self.b)

    def __neg__(self):
        return Dual(-self.a, -self.b)

    def __mul__(self, o):
        if isinstance(o, Dual):
            return Dual(self.a * o.a, self.a * o.b + self.b * o.a)
        return Dual(self.a * o, self.b * o)

    __rmul__ = __mul__

    def __truediv__(self, o):
        if isinstance(o, Dual):
            q = self.a / o.a
            return Dual(q, (self.b - q * o.b) / o.a)
        return Dual(self.a / o, self.b / o)

    def __rtruediv__(self, o):
        q = o / self.a
        return Dual(q, -q * self.b / self.a)

    def ipow(self, k):
        """Integer power, valid for any base except zero with k < 0."""
        if k == 0:
            return Dual(ipow(self.a, 0), self.b * 0.0)
        return Dual(ipow(self.a, k), k * ipow(self.a, k - 1) * self.b)


def ipow(a, k):
    if isinstance(a, Dual):
        return a.ipow(k)
    return float(a) ** k


def sin(v):
    if isinstance(v, Dual):
        return Dual(sin(v.a), cos(v.a) * v.b)
    return math.sin(v)


def cos(v):
    if isinstance(v, Dual):
        return Dual(cos(v.a), -sin(v.a) * v.b)
    return math.cos(v)


def exp(v):
    if isinstance(v, Dual):
        e = exp(v.a)
        return Dual(e, e * v.b)
    return math.exp(v)


def log(v):
    if isinstance(v, Dual):
        return Dual(log(v.a), v.b / v.a)
    return math.log(v)


def sqrt(v):
    if isinstance(v, Dual):
        s = sqrt(v.a)
        return Dual(s, v.b / (2.0 * s))
    return math.sqrt(v)


def seed_second_order(values, column):
    """Lift a point to second-order duals for Hessian column ``column``.

    Each coordinate i becomes Dual(Dual(v_i, e_i), Dual(delta_ij, 0)); after
    evaluation, ``out.a.b`` is the gradient and ``out.b.b`` is column
    ``column`` of the Hessian.
    """
    n = len(values)
    zero = np.zeros(n)
    lifted = []
    for i, v in enumerate(values):
        e = np.zeros(n)
        e[i] = 1.0
        lifted.append(Dual(Dual(float(v), e), Dual(1.0 if i == column else 0.0, zero)))
    return lifted


def unpack_second_order(out, n):
    """Split an evaluation result into (value, gradient, hessian column)."""
    if not isinstance(out, Dual):
        return float(out), np.zeros(n), np.zeros(n)
    inner, outer = out.a, out.b
    if isinstance(inner, Dual):
        value, grad = float(inner.a), _as_vec(inner.b, n)
    else:
        value, grad = float(inner), np.zeros(n)
    hcol = _as_vec(outer.b, n) if isinstance(outer, Dual) else np.zeros(n)
    return value, grad, hcol


def _as_vec(b, n):
    if np.isscalar(b):
        return np.full(n, float(b))
    return np.asarray(b, dtype=float)
