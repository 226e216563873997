"""Quadrature utilities: Gauss-Legendre grids, cumulative primitives,
sphere volumes and deterministic low-discrepancy samplers.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import ndtri


@lru_cache(maxsize=32)
def gauss_legendre(order: int):
    """Nodes and weights on [-1, 1], cached."""
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


def gl_panel(a, b, order: int = 16):
    """Gauss-Legendre nodes/weights on [a, b]; a, b may be arrays (batched)."""
    x, w = gauss_legendre(order)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    half = 0.5 * (b - a)
    nodes = a[..., None] + half[..., None] * (x + 1.0)
    weights = half[..., None] * w
    return nodes, weights


def sphere_volume(d: int) -> float:
    """Riemannian volume (surface measure) of the unit sphere S^d in R^{d+1}."""
    return 2.0 * math.pi ** ((d + 1) / 2.0) / math.gamma((d + 1) / 2.0)


class CumulativePrimitive:
    """F(s) = F(a) + int_a^s fn, by a cumulative Gauss-Legendre table.

    ``fn`` must be vectorized over a 1-D float array.  The table stores the
    running integral at panel knots; an evaluation adds one extra panel from
    the nearest knot below, so the cost per point is ``order`` integrand
    evaluations and the accuracy is quadrature-limited (effectively machine
    precision for the smooth integrands used here).
    """

    def __init__(self, fn, a: float, b: float, panels: int = 512, order: int = 16):
        self.fn = fn
        self.a = float(a)
        self.b = float(b)
        self.order = order
        self.knots = np.linspace(a, b, panels + 1)
        nodes, weights = gl_panel(self.knots[:-1], self.knots[1:], order)
        vals = fn(nodes.ravel()).reshape(nodes.shape)
        panel_ints = np.sum(vals * weights, axis=1)
        self.cum = np.concatenate([[0.0], np.cumsum(panel_ints)])

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        flat = np.clip(s.ravel(), self.a, self.b)
        idx = np.clip(np.searchsorted(self.knots, flat, side="right") - 1, 0, len(self.knots) - 2)
        lo = self.knots[idx]
        nodes, weights = gl_panel(lo, flat, self.order)
        tail = np.sum(self.fn(nodes.ravel()).reshape(nodes.shape) * weights, axis=1)
        return (self.cum[idx] + tail).reshape(s.shape)

    @property
    def total(self) -> float:
        return float(self.cum[-1])


_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29)


def halton(count: int, dims: int, skip: int = 20) -> np.ndarray:
    """Deterministic Halton sequence in [0,1)^dims, shape (count, dims)."""
    out = np.empty((count, dims))
    idx = np.arange(skip, skip + count)
    for j in range(dims):
        base = _PRIMES[j]
        x = np.zeros(count)
        f = 1.0
        i = idx.copy()
        while np.any(i > 0):
            f /= base
            x += f * (i % base)
            i //= base
        out[:, j] = x
    return out


@lru_cache(maxsize=64)
def quasi_sphere_directions(count: int, dim: int) -> np.ndarray:
    """Low-discrepancy unit vectors in R^dim (Halton points through ndtri)."""
    u = halton(count, dim)
    z = ndtri(np.clip(u, 1e-12, 1.0 - 1e-12))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    z.setflags(write=False)
    return z
