"""Constructors for the example immersions, each returning a full Atlas.

The gallery covers the geometries the verification suites run on:

* ``round_sphere``        -- S^n(R) in R^{n+1} in R^{n+2}, the non-wide baseline;
* ``product_spheres``     -- products of two convex hypersurfaces;
* ``moebius_composition`` -- a compact quotient built by composing a cylinder
  over a convex surface with a flat band (orientable and Moebius variants);
* ``switched_sphere``     -- two convex-cap solid tori glued along a flat
  torus/cylinder, with Gauss curvature vanishing to infinite order at the
  interface;
* ``cylinder_quotient``   -- a screw quotient of a cylinder over a convex
  surface of revolution;
* ``synthetic_cone``      -- a metric cone used only to power-test the
  splitting-tensor detector (positive curvature transversally, closed-form
  splitting tensor C = -I/t).

Charts are closed-form jet computations; the only numerics baked into a
constructor are cumulative quadrature tables for profile/curve primitives
(machine-precision on these smooth integrands) and one scalar root solve
that closes the cap profile at its apex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import jets
from .charts import Atlas, Chart, DeckMap, ExampleMetadata
from .errors import (
    BandNotFlat,
    BandSelfCheck,
    DeckNotIsometric,
    ProfileNotC2Matched,
)
from .jets import Jet, compose1, constant, jcos, jexp, jreciprocal, jsin, jsqrt, where
from .quadrature import CumulativePrimitive, gl_panel

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# small jet helpers


def _clip_jet(g: Jet, lo, hi) -> Jet:
    out = g.copy()
    out.f = np.clip(out.f, lo, hi)
    return out


def _exp_decay_jet(t: Jet, a: float) -> Jet:
    """exp(-a/t) for t > 0, exactly zero (all orders) below the underflow knee."""
    safe = _clip_jet(t, a / 700.0, None)
    val = jexp(-a * jreciprocal(safe))
    zero = constant(np.zeros(t.size), t.nvars, t.order)
    return where(t.f > a / 700.0, val, zero)


def _smoothstep_jet(x: Jet) -> Jet:
    """C-infinity step: 0 for x <= 0, 1 for x >= 1, exp-type bump ratio between."""
    xc = _clip_jet(x, 1.0 / 700.0, 1.0 - 1.0 / 700.0)
    e1 = jexp(-jreciprocal(xc))
    e2 = jexp(-jreciprocal(1.0 - xc))
    mid = e1 / (e1 + e2)
    zero = constant(np.zeros(x.size), x.nvars, x.order)
    one = constant(np.ones(x.size), x.nvars, x.order)
    out = where(x.f > 1.0 / 700.0, mid, zero)
    return where(x.f < 1.0 - 1.0 / 700.0, out, one)


def _univariate(fn, s: np.ndarray, order: int = 2) -> tuple:
    """Value and derivatives of a jet-evaluable univariate fn at points s."""
    var = jets.variables(np.asarray(s, dtype=float)[:, None], order=order)[0]
    out = fn(var)
    d1 = out.d1[:, 0]
    d2 = out.d2[:, 0, 0] if order >= 2 else None
    return out.f, d1, d2


def _primitive_jet(table: CumulativePrimitive, integrand_fn, s: Jet) -> Jet:
    """Jet of F(s) where F' = integrand; value from the table, derivatives exact."""
    c0 = table(s.f)
    c1, c2, c3 = _univariate(integrand_fn, s.f, order=2)
    return compose1(s, c0, c1, c2, c3)


# ---------------------------------------------------------------------------
# convex cap profile with infinite-order flat boundary


@dataclass
class ProfileSpec:
    """Parameters of the rotationally symmetric convex cap.

    The profile turning angle is theta(s) = c * int_0^s phi, with
    phi(t) = (1 - chi(t)) exp(-a/t) + chi(t) and chi a smooth step on
    [S - delta, S]; past s = S the profile is an exact spherical cap of
    radius 1/c.  The amplitude c is solved so the cap closes at radius zero,
    which makes the apex a genuine round-sphere pole.  theta and all its
    derivatives vanish at s = 0 (geodesic boundary, curvature flat to
    infinite order) and theta reaches pi/2 at the apex.
    """

    a: float = 1.0          # flatness scale of exp(-a/t)
    delta: float = 0.35     # blend window before the exact cap
    S: float = 1.0          # arclength where the exact spherical cap begins
    r0: float = 1.0         # boundary radius (unit circle interface)

    def __post_init__(self):
        if not (self.a > 0 and 0 < self.delta < self.S and self.r0 > 0):
            raise ValueError("invalid profile parameters")


class CapProfile:
    """Arclength profile (r(s), z(s)) of the cap, jet-evaluable.

    r decreases from r0 to 0 at s = total_length; z increases from 0.
    Gauss curvature of the revolved surface is cos(theta) theta' / r:
    zero to infinite order at s = 0, strictly positive inside, 1/rho_cap^2
    at the apex.
    """

    def __init__(self, spec: ProfileSpec):
        self.spec = spec
        a, delta, S = spec.a, spec.delta, spec.S
        s1 = S - delta

        def chi_flt(t):
            return self._chi_float((np.asarray(t, dtype=float) - s1) / delta)

        def phi_flt(t):
            t = np.asarray(t, dtype=float)
            flat = np.where(t > a / 700.0,
                            np.exp(-a / np.maximum(t, 1e-300)), 0.0)
            c = chi_flt(t)
            return (1.0 - c) * flat + c

        self._phi_flt = phi_flt
        self.psi = CumulativePrimitive(phi_flt, 0.0, S, panels=400)
        psi2 = self.psi.total

        knots = np.linspace(0.0, S, 257)
        nodes, weights = gl_panel(knots[:-1], knots[1:], 16)
        psi_nodes = self.psi(nodes.ravel()).reshape(nodes.shape)

        def closure(c):
            r2 = spec.r0 - np.sum(np.sin(c * psi_nodes) * weights)
            return r2 - np.cos(c * psi2) / c

        cmax = (np.pi / 2.0) / psi2
        grid = np.linspace(0.05 * cmax, 0.999 * cmax, 64)
        vals = [closure(c) for c in grid]
        bracket = None
        for i in range(len(grid) - 1):
            if vals[i] <= 0.0 <= vals[i + 1]:
                bracket = (grid[i], grid[i + 1])
                break
        if bracket is None:
            raise ValueError("cap profile does not close; adjust a/delta/S")
        self.c = brentq(closure, *bracket, xtol=1e-15, rtol=8.9e-16)

        self.theta2 = self.c * psi2
        self.rho_cap = 1.0 / self.c
        self.total_length = S + (np.pi / 2.0 - self.theta2) * self.rho_cap
        self.r_table = CumulativePrimitive(
            lambda t: np.sin(self.c * self.psi(t)), 0.0, S, panels=400)
        self.z_table = CumulativePrimitive(
            lambda t: np.cos(self.c * self.psi(t)), 0.0, S, panels=400)
        self.r2 = spec.r0 - self.r_table.total
        self.z2 = self.z_table.total
        self.z_apex = self.z2 + (1.0 - math.sin(self.theta2)) * self.rho_cap
        self._check_collar()

    # ---- float paths ------------------------------------------------------

    @staticmethod
    def _chi_float(x):
        x = np.asarray(x, dtype=float)
        xc = np.clip(x, 1.0 / 700.0, 1.0 - 1.0 / 700.0)
        e1 = np.exp(-1.0 / xc)
        e2 = np.exp(-1.0 / (1.0 - xc))
        mid = e1 / (e1 + e2)
        return np.where(x <= 1.0 / 700.0, 0.0,
                        np.where(x >= 1.0 - 1.0 / 700.0, 1.0, mid))

    def theta_val(self, s):
        s = np.asarray(s, dtype=float)
        band = self.c * self.psi(np.clip(s, 0.0, self.spec.S))
        cap = self.theta2 + self.c * (s - self.spec.S)
        return np.where(s <= self.spec.S, band, np.minimum(cap, np.pi / 2.0))

    def r_val(self, s):
        s = np.asarray(s, dtype=float)
        band = self.spec.r0 - self.r_table(np.clip(s, 0.0, self.spec.S))
        cap = self.r2 + (np.cos(self.theta_val(s)) - math.cos(self.theta2)) * self.rho_cap
        return np.where(s <= self.spec.S, band, np.maximum(cap, 0.0))

    def z_val(self, s):
        s = np.asarray(s, dtype=float)
        band = self.z_table(np.clip(s, 0.0, self.spec.S))
        cap = self.z2 + (np.sin(self.theta_val(s)) - math.sin(self.theta2)) * self.rho_cap
        return np.where(s <= self.spec.S, band, cap)

    def gauss_curvature(self, s):
        s = np.asarray(s, dtype=float)
        th = self.theta_val(s)
        return np.cos(th) * self.c * self._phi_flt(np.minimum(s, self.spec.S)) / \
            np.maximum(self.r_val(s), 1e-300)

    # ---- jet paths --------------------------------------------------------

    def _phi_jet(self, t: Jet) -> Jet:
        a, delta, s1 = self.spec.a, self.spec.delta, self.spec.S - self.spec.delta
        chi = _smoothstep_jet((t - s1) / delta)
        return (1.0 - chi) * _exp_decay_jet(t, a) + chi

    def eval_all(self, s: Jet):
        """(theta, r, z) jets in one pass with shared table lookups."""
        S, r0 = self.spec.S, self.spec.r0
        sb = np.clip(s.f, 0.0, S)
        in_band = s.f <= S

        # univariate derivative data on the band branch
        phi_u = _univariate(self._phi_jet, sb, order=2)
        th_v = self.c * self.psi(sb)
        th_u = Jet(th_v, (self.c * phi_u[0])[:, None],
                   (self.c * phi_u[1])[:, None, None],
                   (self.c * phi_u[2])[:, None, None, None])
        sin_u = jsin(th_u)
        cos_u = jcos(th_u)
        sclip = _clip_jet(s, 0.0, S)

        def comp(vals, uni):
            return compose1(sclip, vals, uni.f, uni.d1[:, 0], uni.d2[:, 0, 0])

        dtheta_u = Jet(self.c * phi_u[0], (self.c * phi_u[1])[:, None],
                       (self.c * phi_u[2])[:, None, None])
        theta_b = comp(th_v, dtheta_u)
        r_b = r0 - comp(self.r_table(sb), sin_u)
        z_b = comp(self.z_table(sb), cos_u)

        theta_c = (s - S) * self.c + self.theta2
        r_c = (jcos(theta_c) - math.cos(self.theta2)) * self.rho_cap + self.r2
        z_c = (jsin(theta_c) - math.sin(self.theta2)) * self.rho_cap + self.z2

        return (where(in_band, theta_b, theta_c),
                where(in_band, r_b, r_c),
                where(in_band, z_b, z_c))

    def theta_jet(self, s: Jet) -> Jet:
        return self.eval_all(s)[0]

    def r_jet(self, s: Jet) -> Jet:
        return self.eval_all(s)[1]

    def z_jet(self, s: Jet) -> Jet:
        return self.eval_all(s)[2]

    def cap_height_jet(self, q: Jet) -> Jet:
        """Apex graph z(x^2 + y^2) valid where sqrt(q) < r2 (exact cap zone)."""
        arg = self.rho_cap**2 * 1.0 - _clip_jet(q, None, 0.96 * self.rho_cap**2)
        return self.z_apex - self.rho_cap + jsqrt(arg)

    def _check_collar(self, tol: float = 1e-8):
        """2-jet match between the profile and the flat cylinder at s -> 0."""
        probe = np.array([min(self.spec.a / 20.0, 0.25 * self.spec.S)])
        svar = jets.variables(probe[:, None], order=2)[0]
        r = self.r_jet(svar)
        z = self.z_jet(svar)
        worst = max(
            abs(float(r.f[0]) - self.spec.r0), abs(float(r.d1[0, 0])),
            abs(float(r.d2[0, 0, 0])), abs(float(z.f[0]) - probe[0]),
            abs(float(z.d1[0, 0]) - 1.0), abs(float(z.d2[0, 0, 0])),
        )
        if worst > tol:
            raise ProfileNotC2Matched(
                f"cap/collar 2-jet mismatch {worst:.3e} exceeds {tol}")


# ---------------------------------------------------------------------------
# sphere chart building blocks


def _stereo_components(svars, pole_axis: int, pole_sign: float, axes):
    """Ellipsoid from the stereographic chart opposite the pole (+-)e_pole."""
    s2 = svars[0] * svars[0]
    for v in svars[1:]:
        s2 = s2 + v * v
    den = jreciprocal(1.0 + s2)
    comps = []
    k = 0
    for j, aj in enumerate(axes):
        if j == pole_axis:
            comps.append(aj * pole_sign * ((1.0 - s2) * den))
        else:
            comps.append(aj * (2.0 * svars[k] * den))
            k += 1
    return comps


def _polar_components(avars, axes):
    """Ellipsoid from hyperspherical angles; len(avars) = len(axes) - 1."""
    comps = []
    prefix = None
    for i, v in enumerate(avars):
        cur = jcos(v) if prefix is None else prefix * jcos(v)
        comps.append(cur)
        prefix = jsin(v) if prefix is None else prefix * jsin(v)
    comps.append(prefix)
    return [aj * cj for aj, cj in zip(axes, comps)]


def _betti_product(k: int, m: int) -> tuple:
    """Betti numbers of S^k x S^m."""
    n = k + m
    b = [0] * (n + 1)
    for i in (0, k):
        for j in (0, m):
            b[i + j] += 1
    return tuple(b)


# ---------------------------------------------------------------------------
# gallery constructors


def round_sphere(n: int = 3, radius: float = 1.0) -> Atlas:
    """Round S^n(R) in R^{n+1} in R^{n+2}: the strict, non-wide baseline."""
    if n < 3 or radius <= 0:
        raise ValueError("need n >= 3 and radius > 0")
    axes = (radius,) * (n + 1)

    def make_stereo(sign):
        def comps(v):
            out = _stereo_components(v, n, sign, axes)
            return out + [v[0] * 0.0]
        return comps

    charts = []
    for sign, name in ((1.0, "north"), (-1.0, "south")):
        charts.append(Chart(
            label=f"stereo-{name}", n=n, ambient_dim=n + 2,
            box=((-2.5, 2.5),) * n, sample_box=((-1.2, 1.2),) * n,
            newton_seeds=(8,) * n,
            map_jets=_component_map(make_stereo(sign))))

    def quad_comps(v):
        return _polar_components(v, axes) + [v[0] * 0.0]

    qbox = tuple([(0.0, math.pi)] * (n - 1) + [(0.0, TWO_PI)])
    quad = Chart(label="polar", n=n, ambient_dim=n + 2, box=qbox,
                 quad_counts=(10,) * (n - 1) + (14,),
                 map_jets=_component_map(quad_comps))

    betti = tuple([1] + [0] * (n - 1) + [1])
    meta = ExampleMetadata(betti=betti, orientable=True,
                           expected_tau=tuple([1] + [0] * (n - 1) + [1]),
                           expected_strata="U_0 everywhere (strict case)",
                           tight_target=2)
    atlas = Atlas(name="round-s3" if n == 3 else f"round-s{n}",
                  params={"n": n, "radius": radius}, n=n,
                  charts=charts, quad_charts=[quad], deck_maps=[], metadata=meta)
    atlas.wide_expected = False
    atlas.leaf_structure = []
    return atlas


def product_spheres(k: int = 2, m: int = 2, radius1: float = 1.0,
                    radius2: float = 1.0, perturbation: float = 0.0) -> Atlas:
    """Product of two convex hypersurfaces S^k x S^m in R^{k+1+m+1}.

    ``perturbation`` deforms each factor into an ellipsoid (axes scaled by
    1 + perturbation * fixed pattern), which keeps strict convexity while
    breaking the round symmetry.
    """
    n = k + m
    if not (2 <= k and 2 <= m):
        raise ValueError("need k, m >= 2")
    pat1 = np.array([1.0] + [(-0.5) ** i for i in range(1, k + 1)])
    pat2 = np.array([(-0.35) ** i for i in range(m + 1)])
    axes1 = tuple(radius1 * (1.0 + perturbation * pat1))
    axes2 = tuple(radius2 * (1.0 + perturbation * pat2))

    def make_comps(sign1, sign2):
        def comps(v):
            va, vb = v[:k], v[k:]
            return (_stereo_components(va, k, sign1, axes1)
                    + _stereo_components(vb, m, sign2, axes2))
        return comps

    charts = []
    for s1, n1 in ((1.0, "n"), (-1.0, "s")):
        for s2, n2 in ((1.0, "n"), (-1.0, "s")):
            charts.append(Chart(
                label=f"stereo-{n1}{n2}", n=n, ambient_dim=n + 2,
                box=((-2.5, 2.5),) * n, sample_box=((-1.2, 1.2),) * n,
                newton_seeds=(6,) * n,
                map_jets=_component_map(make_comps(s1, s2))))

    def quad_comps(v):
        va, vb = v[:k], v[k:]
        return _polar_components(va, axes1) + _polar_components(vb, axes2)

    qbox = tuple([(0.0, math.pi)] * (k - 1) + [(0.0, TWO_PI)]
                 + [(0.0, math.pi)] * (m - 1) + [(0.0, TWO_PI)])
    quad = Chart(label="polar-product", n=n, ambient_dim=n + 2, box=qbox,
                 quad_counts=(8, 10) * 2 if n == 4 else (8,) * n,
                 map_jets=_component_map(quad_comps))

    betti = _betti_product(k, m)
    meta = ExampleMetadata(betti=betti, orientable=True,
                           expected_tau=betti,
                           expected_strata=f"U_{min(k, m)} everywhere",
                           tight_target=4)
    atlas = Atlas(name="product-s2s2" if (k, m) == (2, 2) else f"product-s{k}s{m}",
                  params={"k": k, "m": m, "radius1": radius1,
                          "radius2": radius2, "perturbation": perturbation},
                  n=n, charts=charts, quad_charts=[quad], deck_maps=[],
                  metadata=meta)
    atlas.wide_expected = True
    atlas.leaf_structure = []
    return atlas


class _DevelopableBand:
    """Flat band in isometric (development) coordinates with a Moebius deck.

    The band is generated from its unit-speed geodesic midline gamma:
    prescribing the normal curvature kappa(t) (anti-periodic, so the strip
    closes up with a flip) and the development angle phi(t) between the
    midline and the rulings (with the monodromy phi(t+1) = pi - phi(t))
    determines the Darboux frame (T, V, n) through a linear ODE; the relative
    torsion tau = -kappa cot(phi) is forced by developability.  Six Fourier
    amplitudes of (kappa, phi) are solved so that the midline closes and the
    frame returns as (T, -V, -n), which makes the deck identity
    beta(x0 + 1, -x1) = beta(x0, x1) exact.

    The chart map inverts the development: the point with flat coordinates
    (x0, x1) sits on the ruling through gamma(t) at offset u = x1/sin(phi),
    where t solves t + x1 cot(phi(t)) = x0 (Newton, also in jet arithmetic).
    The induced metric is the identity, so the strip really is the standard
    flat one; this is what keeps the composed example nonnegatively curved.
    """

    T_LO, T_HI = -0.9, 2.0

    def __init__(self, half_width: float, bend: float = 10.8, skew: float = 0.42):
        self.eps = half_width
        if half_width >= 0.28:
            # flat Moebius bands need aspect ratio length/width > sqrt(3)
            raise ValueError("half width too large for a length-1 flat band")
        self._params = self._solve_monodromy(np.array(
            [bend, 0.0, 0.0, skew, 0.0, 0.0]))
        self._dense = self._integrate(self._params, dense=True)

    # ---- generating data ----------------------------------------------------

    @staticmethod
    def _kappa_float(t, k):
        t = np.asarray(t, dtype=float)
        return np.sin(math.pi * t) * (k[0] + k[1] * np.cos(TWO_PI * t)
                                      + k[2] * np.sin(TWO_PI * t))

    @staticmethod
    def _phi_float(t, p):
        t = np.asarray(t, dtype=float)
        return (math.pi / 2.0 + p[0] * np.cos(math.pi * t)
                + p[1] * np.sin(math.pi * t) + p[2] * np.cos(3 * math.pi * t))

    def _kappa_jet(self, t: Jet) -> Jet:
        k = self._params[:3]
        return jsin(math.pi * t) * (k[0] + k[1] * jcos(TWO_PI * t)
                                    + k[2] * jsin(TWO_PI * t))

    def _phi_jet(self, t: Jet) -> Jet:
        p = self._params[3:]
        return (math.pi / 2.0 + p[0] * jcos(math.pi * t)
                + p[1] * jsin(math.pi * t) + p[2] * jcos(3 * math.pi * t))

    # ---- frame ODE and monodromy solve --------------------------------------

    def _rhs(self, k, p):
        def rhs(t, y):
            gT = y[3:6]
            gV = y[6:9]
            gn = y[9:12]
            ka = self._kappa_float(t, k)
            ph = self._phi_float(t, p)
            ta = -ka / math.tan(ph)
            return np.concatenate([
                gT, ka * gn, ta * gn, -ka * gT - ta * gV])
        return rhs

    def _integrate(self, params, dense=False, rtol=1e-12):
        from scipy.integrate import solve_ivp
        y0 = np.concatenate([np.zeros(3), np.eye(3).ravel()])
        lo = self.T_LO if dense else 0.0
        hi = self.T_HI if dense else 1.0
        sol = solve_ivp(self._rhs(params[:3], params[3:]), (0.0, hi), y0,
                        method="DOP853", rtol=rtol, atol=1e-14,
                        dense_output=dense)
        if dense and lo < 0.0:
            sol_back = solve_ivp(self._rhs(params[:3], params[3:]),
                                 (0.0, lo), y0, method="DOP853",
                                 rtol=rtol, atol=1e-14, dense_output=True)
            return (sol_back, sol)
        return sol

    def _residual(self, params):
        sol = self._integrate(params, rtol=1e-11)
        y1 = sol.y[:, -1]
        gam, T, V = y1[0:3], y1[3:6], y1[6:9]
        return np.array([gam[0], gam[1], gam[2], T[1], T[2], V[2]])

    def _solve_monodromy(self, start):
        from scipy.optimize import root
        res = root(self._residual, start, method="hybr", tol=1e-12)
        params = res.x
        r = self._residual(params)
        # one polish step with a fresh finite-difference Jacobian
        if np.abs(r).max() > 1e-11:
            J = np.empty((6, 6))
            h = 1e-7
            for i in range(6):
                e = np.zeros(6)
                e[i] = h
                J[:, i] = (self._residual(params + e)
                           - self._residual(params - e)) / (2 * h)
            params = params - np.linalg.solve(J, r)
            r = self._residual(params)
        if np.abs(r).max() > 1e-10:
            raise BandSelfCheck(
                f"band monodromy residual {np.abs(r).max():.3e}")
        sol = self._integrate(params)
        V1 = sol.y[6:9, -1]
        if V1[1] > 0:
            raise BandSelfCheck("band frame returned without the flip")
        return params

    # ---- table lookups -------------------------------------------------------

    def _state(self, t):
        """(gamma, T, V, n) at parameter values t, each (B, 3)."""
        t = np.asarray(t, dtype=float)
        sol_back, sol_fwd = self._dense
        out = np.empty((12, t.size))
        neg = t < 0
        if np.any(neg):
            out[:, neg] = sol_back.sol(t[neg])
        if np.any(~neg):
            out[:, ~neg] = sol_fwd.sol(t[~neg])
        y = out.T
        return y[:, 0:3], y[:, 3:6], y[:, 6:9], y[:, 9:12]

    # ---- univariate derivative stacks ---------------------------------------

    def _uni(self, fn_jet, t, order=3):
        """Univariate jet of a closed-form scalar at float points t."""
        var = jets.variables(np.asarray(t, dtype=float)[:, None], order=order)[0]
        return fn_jet(var)

    @staticmethod
    def _jet_ddt(j: Jet) -> Jet:
        """d/dt of a univariate jet (order drops by one; value stays exact)."""
        f = j.d1[:, 0]
        d1 = (j.d2[:, 0, :] if j.d2 is not None
              else np.zeros((j.f.shape[0], 1)))
        d2 = j.d3[:, 0, :, :] if j.d3 is not None else None
        return Jet(f, d1, d2, None)

    def _vector_stacks(self, t):
        """Derivative stacks (order 0..3) of gamma and R = cos(phi)T + sin(phi)V.

        Returns (gamma_stack, R_stack): lists of four (B, 3) arrays holding
        the k-th t-derivatives, obtained by jet-level differentiation of the
        frame coefficients through the Darboux ODE.
        """
        t = np.asarray(t, dtype=float)
        gam, T, V, n = self._state(t)
        frame = np.stack([T, V, n], axis=1)          # (B, 3(frame), 3(ambient))

        ka = self._uni(self._kappa_jet, t)
        ph = self._uni(self._phi_jet, t)
        ta = -1.0 * ka * jcos(ph) / jsin(ph)
        zero = ka * 0.0

        def coeff_ddt(C):
            """Differentiate coefficient rows over (T, V, n) through the ODE.

            (c_T T + c_V V + c_n n)' = (c_T' - c_n kappa) T
                                     + (c_V' - c_n tau) V
                                     + (c_n' + c_T kappa + c_V tau) n
            """
            out = []
            for (cT, cV, cn) in C:
                dT = self._jet_ddt(cT) - cn * ka
                dV = self._jet_ddt(cV) - cn * ta
                dn = self._jet_ddt(cn) + cT * ka + cV * ta
                out.append((dT, dV, dn))
            return out

        # R row: coefficients (cos phi, sin phi, 0)
        rows = [(jcos(ph), jsin(ph), zero)]
        R_stack = [self._row_values(rows[0], frame)]
        cur = rows[0]
        for _ in range(3):
            cur = coeff_ddt([cur])[0]
            R_stack.append(self._row_values(cur, frame))

        # gamma: value from the table, derivatives are the T-row stack
        one = 1.0 + zero
        trow = (one, zero, zero)
        g_stack = [gam, self._row_values(trow, frame)]
        cur = trow
        for _ in range(2):
            cur = coeff_ddt([cur])[0]
            g_stack.append(self._row_values(cur, frame))
        return g_stack, R_stack

    @staticmethod
    def _row_values(row, frame):
        coef = np.stack([row[0].f, row[1].f, row[2].f], axis=1)   # (B, 3)
        return np.einsum("bf,bfa->ba", coef, frame)

    # ---- development inversion ----------------------------------------------

    def _solve_t(self, x0, x1, iters=60):
        t = np.array(x0, dtype=float, copy=True)
        p = self._params[3:]
        k = self._params[:3]
        for _ in range(iters):
            ph = self._phi_float(t, p)
            F = t + x1 / np.tan(ph) - x0
            dphi = self._dphi_float(t, p)
            Fp = 1.0 - x1 * dphi / np.sin(ph) ** 2
            step = F / Fp
            t = t - step
            if np.abs(step).max() < 1e-15:
                break
        return t

    @staticmethod
    def _dphi_float(t, p):
        t = np.asarray(t, dtype=float)
        return (-p[0] * math.pi * np.sin(math.pi * t)
                + p[1] * math.pi * np.cos(math.pi * t)
                - 3 * math.pi * p[2] * np.sin(3 * math.pi * t))

    def beta_values(self, x0, x1):
        t = self._solve_t(np.asarray(x0, float), np.asarray(x1, float))
        gam, T, V, _ = self._state(t)
        ph = self._phi_float(t, self._params[3:])
        R = np.cos(ph)[:, None] * T + np.sin(ph)[:, None] * V
        u = np.asarray(x1, float) / np.sin(ph)
        return gam + u[:, None] * R

    def beta_jets(self, x0: Jet, x1: Jet):
        tf = self._solve_t(x0.f, x1.f)
        # lift t(x0, x1) to a jet by Newton iterations in jet arithmetic
        t = constant(tf, x0.nvars, x0.order)
        for _ in range(x0.order + 1):
            ph_u = self._uni(self._phi_jet, t.f)
            cot = self._compose(t, jcos(ph_u) / jsin(ph_u))
            sin2 = self._compose(t, jsin(ph_u) * jsin(ph_u))
            dphi = self._compose(t, self._jet_pad(self._jet_ddt(ph_u)))
            F = t + x1 * cot - x0
            Fp = 1.0 - x1 * dphi / sin2
            t = t - F / Fp
        g_stack, R_stack = self._vector_stacks(t.f)
        ph_u = self._uni(self._phi_jet, t.f)
        sinphi = self._compose(t, jsin(ph_u))
        u = x1 / sinphi
        out = []
        for j in range(3):
            gam = compose1(t, g_stack[0][:, j], g_stack[1][:, j],
                           g_stack[2][:, j], g_stack[3][:, j])
            Rj = compose1(t, R_stack[0][:, j], R_stack[1][:, j],
                          R_stack[2][:, j], R_stack[3][:, j])
            out.append(gam + u * Rj)
        return out

    @staticmethod
    def _jet_pad(j: Jet) -> Jet:
        """Pad a reduced-order univariate jet back to full storage with zeros."""
        B = j.f.shape[0]
        d1 = j.d1 if j.d1 is not None else np.zeros((B, 1))
        d2 = j.d2 if j.d2 is not None else np.zeros((B, 1, 1))
        d3 = j.d3 if j.d3 is not None else np.zeros((B, 1, 1, 1))
        return Jet(j.f, d1, d2, d3)

    @staticmethod
    def _compose(t: Jet, uni: Jet) -> Jet:
        c = [uni.f,
             uni.d1[:, 0] if uni.d1 is not None else np.zeros_like(uni.f),
             uni.d2[:, 0, 0] if uni.d2 is not None else np.zeros_like(uni.f),
             uni.d3[:, 0, 0, 0] if uni.d3 is not None else np.zeros_like(uni.f)]
        return compose1(t, *c[: t.order + 1])


def _component_map(components):
    def map_jets(u, order):
        return components(jets.variables(u, order))
    return map_jets


def moebius_composition(band: str = "moebius", eps: float = 0.22,
                        semi_axes: tuple = (0.16, 1.0, 0.85),
                        bend: float = 10.8, skew: float = 0.42) -> Atlas:
    """Example-1 style composition f = (flat band x Id) o (Id x convex surface).

    ``band="moebius"`` uses the developable band with the flip monodromy
    (nonorientable quotient); ``band="cylinder"`` a planar-curve cylinder
    (orientable quotient diffeomorphic to S^2 x S^1).  The convex surface is
    an ellipsoid with first semi-axis < eps, reflection symmetric in its
    first coordinate, so the deck map (x0 + 1, -x1) descends exactly.
    """
    if band not in ("moebius", "cylinder"):
        raise ValueError("band must be 'moebius' or 'cylinder'")
    if semi_axes[0] >= eps:
        raise ValueError("first semi-axis must stay below the band half width")
    axes = tuple(float(a) for a in semi_axes)
    flip = band == "moebius"
    bandobj = _DevelopableBand(eps, bend, skew) if flip else None
    rho = 1.0 / TWO_PI

    def f_comps(x0: Jet, g1: Jet, g2: Jet, g3: Jet):
        if flip:
            b = bandobj.beta_jets(x0, g1)
            return [b[0], b[1], b[2], g2, g3]
        return [rho * jcos(TWO_PI * x0), rho * jsin(TWO_PI * x0), g1, g2, g3]

    def make_chart(sign, name):
        def comps(v):
            x0, s1, s2 = v
            g = _stereo_components([s1, s2], 1, sign, axes)
            return f_comps(x0, g[0], g[1], g[2])
        return Chart(label=f"band-{name}", n=3, ambient_dim=5,
                     box=((-0.6, 1.6), (-2.5, 2.5), (-2.5, 2.5)),
                     sample_box=((0.0, 1.0), (-1.2, 1.2), (-1.2, 1.2)),
                     newton_seeds=(12, 7, 7),
                     map_jets=_component_map(comps))

    charts = [make_chart(1.0, "n"), make_chart(-1.0, "s")]

    def quad_comps(v):
        x0, th, ph = v
        u1 = jsin(th) * jcos(ph)
        u2 = jcos(th)
        u3 = jsin(th) * jsin(ph)
        return f_comps(x0, axes[0] * u1, axes[1] * u2, axes[2] * u3)

    quad = Chart(label="band-polar", n=3, ambient_dim=5,
                 box=((-0.15, 1.15), (-0.2, math.pi + 0.2), (-0.5, TWO_PI + 0.5)),
                 sample_box=((0.0, 1.0), (0.0, math.pi), (0.0, TWO_PI)),
                 quad_counts=(26, 10, 12),
                 map_jets=_component_map(quad_comps))

    def deck(u):
        out = np.array(u, dtype=float, copy=True)
        out[:, 0] += 1.0
        if flip:
            out[:, 1] = -out[:, 1]
        return out

    meta = ExampleMetadata(
        betti=(1, 1, 1, 1), orientable=not flip,
        expected_tau=(1, 1, 1, 1) if not flip else None,
        expected_strata="U_1 a.e.; flat band lines in K (moebius variant)",
        tight_target=4)
    atlas = Atlas(name="moebius" if flip else "moebius-cyl",
                  params={"eps": eps, "semi_axes": list(axes),
                          "bend": bend, "skew": skew},
                  n=3, charts=charts, quad_charts=[quad],
                  deck_maps=[DeckMap("band-period", (), deck)], metadata=meta)
    def leaf_wrap(u):
        out = np.array(u, dtype=float, copy=True)
        for _ in range(4):
            high = out[:, 0] > 1.1
            low = out[:, 0] < -0.1
            if not (high.any() or low.any()):
                break
            out[high, 0] -= 1.0
            out[low, 0] += 1.0
            if flip:
                moved = high | low
                out[moved, 2] = np.pi - out[moved, 2]
        out[:, 2] = np.mod(out[:, 2], TWO_PI)
        return out

    atlas.wide_expected = True
    atlas.leaf_structure = [{
        "chart": quad, "cross_axes": (1, 2),
        "cross_box": ((0.0, math.pi), (0.0, TWO_PI)),
        "leaf_axis": 0, "leaf_anchor": 0.37,
        "period_hint": 2.4 if flip else 1.2,
        "wrap": leaf_wrap,
    }]
    if flip:
        _band_checks(bandobj, atlas)
    return atlas


def _band_checks(bandobj: _DevelopableBand, atlas: Atlas):
    """Flatness, isometry and periodicity residuals of the band construction."""
    rng = np.random.default_rng(7)
    pts = np.stack([rng.uniform(-0.2, 1.0, 400),
                    rng.uniform(-bandobj.eps, bandobj.eps, 400)], axis=1)

    def beta_chart_map(u, order):
        v = jets.variables(u, order)
        return bandobj.beta_jets(v[0], v[1])

    strip = Chart(label="strip", n=2, ambient_dim=3,
                  box=((-0.6, 1.6), (-bandobj.eps, bandobj.eps)),
                  map_jets=beta_chart_map)
    from .curvature import curvature_data
    curv = curvature_data(strip, pts)
    gauss = np.abs(curv.rhat[:, 0, 0])
    if gauss.max() > 1e-8:
        raise BandNotFlat(f"band Gauss curvature reaches {gauss.max():.3e}")
    iso = np.abs(curv.metric.g - np.eye(2)).max()
    if iso > 1e-8:
        raise BandNotFlat(f"development coordinates not isometric: {iso:.3e}")
    a = strip.values(pts)
    b = strip.values(np.stack([pts[:, 0] + 1.0, -pts[:, 1]], axis=1))
    defect = np.linalg.norm(a - b, axis=1).max()
    if defect > 1e-9:
        raise BandSelfCheck(f"band periodicity defect {defect:.3e}")
    atlas.band_flatness = float(gauss.max())
    atlas.band_periodicity = float(defect)


def switched_sphere(eps: float = 0.2, profile: ProfileSpec | None = None) -> Atlas:
    """Two solid tori with convex-cap cross sections glued along a flat collar.

    N+ is (cap surface) x S^1 in R^2 x R_+ x R^2, N- the mirror image with
    the roles of the R^2 factors exchanged, and a flat cylinder of height
    ``eps`` sits between them.  The cap's Gauss curvature vanishes to
    infinite order at its boundary circle, so the glued manifold is smooth
    with nonnegative curvature: the prototype wide sphere.
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    prof = CapProfile(profile or ProfileSpec())
    half = eps / 2.0
    Stot = prof.total_length
    tmax = half + Stot

    def band_comps(v):
        t, pa, pb = v
        zero = t * 0.0
        one = 1.0 + zero
        s_plus = _clip_jet(t - half, 0.0, Stot - 1e-12)
        s_minus = _clip_jet(-1.0 * t - half, 0.0, Stot - 1e-12)
        in_plus = t.f > half
        in_minus = t.f < -half
        _, r_plus, z_plus = prof.eval_all(s_plus)
        _, r_minus, z_minus = prof.eval_all(s_minus)
        R1 = where(in_plus, r_plus, one)
        R2 = where(in_minus, r_minus, one)
        X2 = where(in_plus, z_plus + half,
                   where(in_minus, -1.0 * z_minus - half, t))
        return [R1 * jcos(pa), R1 * jsin(pa), X2, R2 * jcos(pb), R2 * jsin(pb)]

    # keep the band chart clear of the coordinate singularity at the apexes
    s_cut = _solve_cap_radius(prof, 0.55 * prof.r2)
    t_in = half + s_cut
    band = Chart(label="band", n=3, ambient_dim=5,
                 box=((-tmax + 1e-9, tmax - 1e-9), (-7.0, 13.0), (-7.0, 13.0)),
                 sample_box=((-t_in, t_in), (0.0, TWO_PI), (0.0, TWO_PI)),
                 newton_seeds=(14, 8, 8),
                 accept_box=((-t_in - 0.08, t_in + 0.08), (-7.0, 13.0),
                             (-7.0, 13.0)),
                 map_jets=_component_map(band_comps))
    quad = Chart(label="band-full", n=3, ambient_dim=5,
                 box=band.box, sample_box=((-tmax, tmax), (0.0, TWO_PI), (0.0, TWO_PI)),
                 quad_counts=(44, 8, 8),
                 map_jets=_component_map(band_comps))

    Lbox = 0.62 * prof.r2

    def apex_plus(v):
        x, y, pb = v
        zc = prof.cap_height_jet(x * x + y * y) + half
        return [x, y, zc, jcos(pb), jsin(pb)]

    def apex_minus(v):
        pa, x, y = v
        zc = -1.0 * prof.cap_height_jet(x * x + y * y) - half
        return [jcos(pa), jsin(pa), zc, x, y]

    ap_plus = Chart(label="apex-plus", n=3, ambient_dim=5,
                    box=((-Lbox, Lbox), (-Lbox, Lbox), (-7.0, 13.0)),
                    sample_box=((-Lbox, Lbox), (-Lbox, Lbox), (0.0, TWO_PI)),
                    newton_seeds=(5, 5, 8),
                    map_jets=_component_map(apex_plus))
    ap_minus = Chart(label="apex-minus", n=3, ambient_dim=5,
                     box=((-7.0, 13.0), (-Lbox, Lbox), (-Lbox, Lbox)),
                     sample_box=((0.0, TWO_PI), (-Lbox, Lbox), (-Lbox, Lbox)),
                     newton_seeds=(5, 5, 8),
                     map_jets=_component_map(apex_minus))

    def deck_a(u):
        out = np.array(u, dtype=float, copy=True)
        out[:, 1] += TWO_PI
        return out

    def deck_b(u):
        out = np.array(u, dtype=float, copy=True)
        out[:, 2] += TWO_PI
        return out

    meta = ExampleMetadata(
        betti=(1, 0, 0, 1), orientable=True, expected_tau=(1, 1, 1, 1),
        expected_strata="U_1 on the cap tori, flat RelNullity on the collar",
        tight_target=4)
    atlas = Atlas(name="switched-s3",
                  params={"eps": eps, "profile": {
                      "a": prof.spec.a, "delta": prof.spec.delta,
                      "S": prof.spec.S, "r0": prof.spec.r0}},
                  n=3, charts=[band, ap_plus, ap_minus], quad_charts=[quad],
                  deck_maps=[DeckMap("phi-a", ("band",), deck_a),
                             DeckMap("phi-b", ("band",), deck_b)],
                  metadata=meta)
    def leaf_wrap(u):
        out = np.array(u, dtype=float, copy=True)
        out[:, 1] = np.mod(out[:, 1], TWO_PI)
        out[:, 2] = np.mod(out[:, 2], TWO_PI)
        return out

    atlas.wide_expected = True
    atlas.profile = prof
    atlas.leaf_structure = [
        {"chart": quad, "cross_axes": (0, 1),
         "cross_box": ((half, tmax), (0.0, TWO_PI)),
         "leaf_axis": 2, "leaf_anchor": 0.31, "period_hint": TWO_PI,
         "wrap": leaf_wrap},
        {"chart": quad, "cross_axes": (0, 2),
         "cross_box": ((-tmax, -half), (0.0, TWO_PI)),
         "leaf_axis": 1, "leaf_anchor": 0.31, "period_hint": TWO_PI,
         "wrap": leaf_wrap},
    ]
    return atlas


def _solve_cap_radius(prof: CapProfile, target: float) -> float:
    """Arclength s in the cap zone with r(s) = target (for chart overlap)."""
    f = lambda s: prof.r_val(np.array([s]))[0] - target
    return brentq(f, prof.spec.S, prof.total_length - 1e-12, xtol=1e-12)


def cylinder_quotient(semi_axes: tuple = (1.2, 0.9, 0.9),
                      deck_angle: float = math.pi / 3.0,
                      period: float = 1.0) -> Atlas:
    """Screw quotient (N^2 x R)/Z realized with closed leaves in R^5.

    The cross section is a strictly convex ellipsoid of revolution about its
    first axis; the R factor winds around a planar unit-speed circle while
    the revolution angle advances by ``deck_angle`` per period, so
    f(tau(x)) = f(x) holds exactly for the screw deck map.  The image
    submanifold is the metric product circle x section for every angle,
    which is what makes the screw an isometric deck transformation.
    """
    if abs(semi_axes[1] - semi_axes[2]) > 1e-15:
        raise ValueError("cross section must be a surface of revolution")
    axes = tuple(float(a) for a in semi_axes)
    rho = period / TWO_PI
    rate = deck_angle / period

    def f_comps(x0, g1, g2, g3):
        ca, sa = jcos(rate * x0), jsin(rate * x0)
        return [rho * jcos(TWO_PI / period * x0), rho * jsin(TWO_PI / period * x0),
                g1, ca * g2 - sa * g3, sa * g2 + ca * g3]

    def make_chart(sign, name):
        def comps(v):
            x0, s1, s2 = v
            g = _stereo_components([s1, s2], 0, sign, axes)
            return f_comps(x0, g[0], g[1], g[2])
        return Chart(label=f"screw-{name}", n=3, ambient_dim=5,
                     box=((-0.6 * period, 1.6 * period), (-2.5, 2.5), (-2.5, 2.5)),
                     sample_box=((0.0, period), (-1.2, 1.2), (-1.2, 1.2)),
                     newton_seeds=(10, 7, 7),
                     map_jets=_component_map(comps))

    charts = [make_chart(1.0, "n"), make_chart(-1.0, "s")]

    def quad_comps(v):
        x0, th, ph = v
        return f_comps(x0, axes[0] * jcos(th),
                       axes[1] * (jsin(th) * jcos(ph)),
                       axes[2] * (jsin(th) * jsin(ph)))

    quad = Chart(label="screw-polar", n=3, ambient_dim=5,
                 box=((-0.15 * period, 1.15 * period), (-0.2, math.pi + 0.2),
                      (-0.8, TWO_PI + 0.8)),
                 sample_box=((0.0, period), (0.0, math.pi), (0.0, TWO_PI)),
                 quad_counts=(10, 10, 12),
                 map_jets=_component_map(quad_comps))

    def deck(u):
        out = np.array(u, dtype=float, copy=True)
        out[:, 0] += period
        c, s = math.cos(deck_angle), math.sin(deck_angle)
        s1 = out[:, 1].copy()
        s2 = out[:, 2].copy()
        out[:, 1] = c * s1 + s * s2
        out[:, 2] = -s * s1 + c * s2
        return out

    meta = ExampleMetadata(
        betti=(1, 1, 1, 1), orientable=True, expected_tau=(1, 1, 1, 1),
        expected_strata="U_1 everywhere", tight_target=4)
    atlas = Atlas(name="cylinder-quotient",
                  params={"semi_axes": list(axes), "deck_angle": deck_angle,
                          "period": period},
                  n=3, charts=charts, quad_charts=[quad],
                  deck_maps=[DeckMap("screw", (), deck)], metadata=meta)
    def leaf_wrap(u):
        out = np.array(u, dtype=float, copy=True)
        for _ in range(4):
            high = out[:, 0] > 1.1 * period
            low = out[:, 0] < -0.1 * period
            if not (high.any() or low.any()):
                break
            # deck in polar chart coordinates: (x0 - P, theta, phi + angle)
            out[high, 0] -= period
            out[high, 2] += deck_angle
            out[low, 0] += period
            out[low, 2] -= deck_angle
        out[:, 2] = np.mod(out[:, 2], TWO_PI)
        return out

    atlas.wide_expected = True
    atlas.leaf_structure = [{
        "chart": quad, "cross_axes": (1, 2),
        "cross_box": ((0.0, math.pi), (0.0, TWO_PI)),
        "leaf_axis": 0, "leaf_anchor": 0.29 * period, "period_hint": period,
        "wrap": leaf_wrap,
    }]
    _check_deck_isometry(atlas)
    return atlas


def _check_deck_isometry(atlas: Atlas, samples: int = 200, tol: float = 1e-9):
    """Metric pullback defect of the deck maps (they must be isometries)."""
    rng = np.random.default_rng(3)
    for deck in atlas.deck_maps:
        for chart in atlas.charts:
            if deck.chart_labels and chart.label not in deck.chart_labels:
                continue
            u = chart.sample(samples, rng)
            v = deck.apply(u)
            h = 1e-5
            worst = 0.0
            gu = _metric_at(chart, u)
            # pull back the metric through the (affine or rotational) deck map
            Ju = _deck_jacobian(deck, u, h)
            gv = _metric_at(chart, v)
            pull = np.einsum("bia,bij,bjc->bac", Ju, gv, Ju)
            worst = max(worst, float(np.abs(pull - gu).max()))
            if worst > tol:
                raise DeckNotIsometric(f"deck metric defect {worst:.3e}")


def _metric_at(chart, u):
    F1 = chart.d1(u)
    return np.einsum("bai,baj->bij", F1, F1)


def _deck_jacobian(deck, u, h):
    n = u.shape[1]
    J = np.empty((u.shape[0], n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        J[:, :, i] = (deck.apply(u + e) - deck.apply(u - e)) / (2 * h)
    return J


def synthetic_cone(opening: float = 0.7, t_range: tuple = (0.6, 2.5)) -> Atlas:
    """Cone over a geodesic sphere in S^3: the splitting-tensor power fixture.

    The radial direction spans the nullity; the splitting tensor is
    C = -(1/t) Id on its complement, the closed-form solution of the Riccati
    equation C' = C^2.  Positive transverse curvature keeps the nullity
    one-dimensional.  Not part of the nonnegativity acceptance gallery.
    """
    cr, sr = math.cos(opening), math.sin(opening)

    def comps(v):
        t, th, ph = v
        u1 = jsin(th) * jcos(ph)
        u2 = jcos(th)
        u3 = jsin(th) * jsin(ph)
        return [t * cr, (sr * t) * u1, (sr * t) * u2, (sr * t) * u3, t * 0.0]

    chart = Chart(label="cone", n=3, ambient_dim=5,
                  box=((t_range[0], t_range[1]), (0.35, math.pi - 0.35),
                       (-7.0, 13.0)),
                  sample_box=((t_range[0], t_range[1]), (0.5, math.pi - 0.5),
                              (0.0, TWO_PI)),
                  map_jets=_component_map(comps))
    meta = ExampleMetadata(betti=(1, 0, 0, 0), orientable=True,
                           expected_strata="synthetic, not in gallery")
    atlas = Atlas(name="synthetic-cone",
                  params={"opening": opening, "t_range": list(t_range)},
                  n=3, charts=[chart], quad_charts=[chart], deck_maps=[],
                  metadata=meta)
    atlas.wide_expected = False
    atlas.leaf_structure = []
    return atlas


REGISTRY = {
    "round-s3": round_sphere,
    "product-s2s2": product_spheres,
    "moebius": lambda **kw: moebius_composition(band="moebius", **kw),
    "moebius-cyl": lambda **kw: moebius_composition(band="cylinder", **kw),
    "switched-s3": switched_sphere,
    "cylinder-quotient": cylinder_quotient,
    "synthetic-cone": synthetic_cone,
}

#: the six examples exercised by the acceptance criteria
GALLERY_NAMES = ("round-s3", "product-s2s2", "moebius", "moebius-cyl",
                 "switched-s3", "cylinder-quotient")


def build(name: str, **params) -> Atlas:
    try:
        ctor = REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown example {name!r}; "
                         f"choose from {sorted(REGISTRY)}")
    return ctor(**params)
