"""Batched truncated-jet (Taylor) arithmetic up to third order.

A :class:`Jet` carries the value of a scalar quantity together with its
symmetric partial-derivative tensors up to a chosen order (1, 2 or 3) in
``n`` base variables, batched over a leading axis.  Propagating jets through
the closed-form chart maps yields derivatives that are exact up to roundoff,
which is what the curvature formulas downstream need: two metric derivatives
require three derivatives of the chart map.

Only the operations the chart gallery actually uses are provided: ring
arithmetic, division, and composition with smooth univariate functions
(exp, sin, cos, sqrt, log, reciprocal and arbitrary coefficient tables).
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Jet",
    "variables",
    "constant",
    "compose1",
    "where",
    "jexp",
    "jsin",
    "jcos",
    "jsqrt",
    "jlog",
    "jreciprocal",
]


def _outer(a, b):
    return np.einsum("bi,bj->bij", a, b)


def _outer3(a, b, c):
    return np.einsum("bi,bj,bk->bijk", a, b, c)


def _sym3(v1, t2):
    """Symmetrized product of a 1-tensor and a 2-tensor.

    out[b,i,j,k] = v1[b,i] t2[b,j,k] + v1[b,j] t2[b,i,k] + v1[b,k] t2[b,i,j]
    """
    x = np.einsum("bi,bjk->bijk", v1, t2)
    return x + x.transpose(0, 2, 1, 3) + x.transpose(0, 3, 2, 1)


class Jet:
    """Value plus symmetric derivative tensors of order 1..3, batched.

    Shapes: ``f`` is ``(B,)``, ``d1`` is ``(B, n)``, ``d2`` is ``(B, n, n)``
    and ``d3`` is ``(B, n, n, n)``.  ``d2``/``d3`` are ``None`` below the
    carried order.  Mixed partials are stored fully (symmetric) because the
    base dimension never exceeds four here.
    """

    __slots__ = ("f", "d1", "d2", "d3")

    def __init__(self, f, d1, d2=None, d3=None):
        self.f = np.asarray(f, dtype=float)
        self.d1 = np.asarray(d1, dtype=float)
        self.d2 = None if d2 is None else np.asarray(d2, dtype=float)
        self.d3 = None if d3 is None else np.asarray(d3, dtype=float)

    @property
    def order(self) -> int:
        if self.d3 is not None:
            return 3
        if self.d2 is not None:
            return 2
        return 1

    @property
    def nvars(self) -> int:
        return self.d1.shape[1]

    @property
    def size(self) -> int:
        return self.f.shape[0]

    def copy(self) -> "Jet":
        return Jet(
            self.f.copy(),
            self.d1.copy(),
            None if self.d2 is None else self.d2.copy(),
            None if self.d3 is None else self.d3.copy(),
        )

    # -- ring operations ---------------------------------------------------

    def _const_like(self, c):
        c = np.broadcast_to(np.asarray(c, dtype=float), self.f.shape)
        return constant(c, self.nvars, self.order)

    def __add__(self, other):
        if not isinstance(other, Jet):
            out = self.copy()
            out.f = out.f + other
            return out
        k = min(self.order, other.order)
        return Jet(
            self.f + other.f,
            self.d1 + other.d1,
            self.d2 + other.d2 if k >= 2 else None,
            self.d3 + other.d3 if k >= 3 else None,
        )

    __radd__ = __add__

    def __neg__(self):
        return Jet(
            -self.f,
            -self.d1,
            None if self.d2 is None else -self.d2,
            None if self.d3 is None else -self.d3,
        )

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet) else -np.asarray(other, dtype=float))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            c = np.asarray(other, dtype=float)
            if c.ndim == 0:
                c = c[None]
            c = np.broadcast_to(c, self.f.shape)
            return Jet(
                self.f * c,
                self.d1 * c[:, None],
                None if self.d2 is None else self.d2 * c[:, None, None],
                None if self.d3 is None else self.d3 * c[:, None, None, None],
            )
        a, b = self, other
        k = min(a.order, b.order)
        f = a.f * b.f
        d1 = a.f[:, None] * b.d1 + b.f[:, None] * a.d1
        d2 = d3 = None
        if k >= 2:
            d2 = (
                a.f[:, None, None] * b.d2
                + b.f[:, None, None] * a.d2
                + _outer(a.d1, b.d1)
                + _outer(b.d1, a.d1)
            )
        if k >= 3:
            d3 = (
                a.f[:, None, None, None] * b.d3
                + b.f[:, None, None, None] * a.d3
                + _sym3(a.d1, b.d2)
                + _sym3(b.d1, a.d2)
            )
        return Jet(f, d1, d2, d3)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / np.asarray(other, dtype=float))
        return self * jreciprocal(other)

    def __rtruediv__(self, other):
        return jreciprocal(self) * other

    def __pow__(self, p):
        if not isinstance(p, int) or p < 0:
            raise ValueError("only nonnegative integer powers are supported")
        out = self._const_like(1.0)
        base = self
        while p:
            if p & 1:
                out = out * base
            base = base * base if p > 1 else base
            p >>= 1
        return out


def variables(u, order: int = 3) -> list[Jet]:
    """Seed jets for the coordinates of a batch of points ``u`` of shape (B, n)."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    B, n = u.shape
    out = []
    for i in range(n):
        d1 = np.zeros((B, n))
        d1[:, i] = 1.0
        d2 = np.zeros((B, n, n)) if order >= 2 else None
        d3 = np.zeros((B, n, n, n)) if order >= 3 else None
        out.append(Jet(u[:, i].copy(), d1, d2, d3))
    return out


def constant(value, nvars: int, order: int = 3) -> Jet:
    value = np.atleast_1d(np.asarray(value, dtype=float))
    B = value.shape[0]
    return Jet(
        value,
        np.zeros((B, nvars)),
        np.zeros((B, nvars, nvars)) if order >= 2 else None,
        np.zeros((B, nvars, nvars, nvars)) if order >= 3 else None,
    )


def compose1(g: Jet, c0, c1, c2=None, c3=None) -> Jet:
    """Compose a univariate function with the jet ``g`` (Faa di Bruno).

    ``c0..c3`` are the function value and derivatives evaluated at ``g.f``,
    each of shape (B,).  Orders above ``g.order`` are ignored.
    """
    c0 = np.asarray(c0, dtype=float)
    c1 = np.asarray(c1, dtype=float)
    d1 = c1[:, None] * g.d1
    d2 = d3 = None
    if g.order >= 2:
        c2 = np.asarray(c2, dtype=float)
        d2 = c2[:, None, None] * _outer(g.d1, g.d1) + c1[:, None, None] * g.d2
    if g.order >= 3:
        c3 = np.asarray(c3, dtype=float)
        d3 = (
            c3[:, None, None, None] * _outer3(g.d1, g.d1, g.d1)
            + c2[:, None, None, None] * _sym3(g.d1, g.d2)
            + c1[:, None, None, None] * g.d3
        )
    return Jet(np.broadcast_to(c0, g.f.shape).copy(), d1, d2, d3)


def where(mask, a: Jet, b: Jet) -> Jet:
    """Coefficient-wise selection; both branches must share shape and order."""
    mask = np.asarray(mask, dtype=bool)
    k = min(a.order, b.order)
    return Jet(
        np.where(mask, a.f, b.f),
        np.where(mask[:, None], a.d1, b.d1),
        np.where(mask[:, None, None], a.d2, b.d2) if k >= 2 else None,
        np.where(mask[:, None, None, None], a.d3, b.d3) if k >= 3 else None,
    )


def jexp(g: Jet) -> Jet:
    e = np.exp(g.f)
    return compose1(g, e, e, e, e)


def jsin(g: Jet) -> Jet:
    s, c = np.sin(g.f), np.cos(g.f)
    return compose1(g, s, c, -s, -c)


def jcos(g: Jet) -> Jet:
    s, c = np.sin(g.f), np.cos(g.f)
    return compose1(g, c, -s, -c, s)


def jsqrt(g: Jet) -> Jet:
    r = np.sqrt(g.f)
    return compose1(g, r, 0.5 / r, -0.25 / (r * g.f), 0.375 / (r * g.f * g.f))


def jlog(g: Jet) -> Jet:
    x = g.f
    return compose1(g, np.log(x), 1.0 / x, -1.0 / x**2, 2.0 / x**3)


def jreciprocal(g: Jet) -> Jet:
    x = g.f
    return compose1(g, 1.0 / x, -1.0 / x**2, 2.0 / x**3, -6.0 / x**4)
