"""Nullity, splitting tensor, normal connection and leaf machinery.

These are the tools behind the splitting analysis of the wide immersions:
the curvature nullity and relative nullity spaces, the splitting tensor
C X = -nabla_X T of the unit nullity field with its Riccati property along
leaves, the normal connection form w(X) = <nabla^perp_X xi, eta>, the
composition criterion ker B subset ker w, and total curvature of closed
nullity leaves.

Derivative-based quantities use finite differences of gauge-fixed fields
with Richardson extrapolation; near rank boundaries the operations refuse
(AmbiguousRank / NullityNotLine) rather than extrapolate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curvature import curvature_data
from .errors import AmbiguousRank, LeafNotClosed, NullityNotLine
from .extrinsic import (
    FrameField,
    classify_batch,
    frame_batch,
    ricci_from_shape,
    weinstein_batch,
)

DEFAULT_STEP = 1e-4


@dataclass
class NullityData:
    """Nullity and relative nullity at a point (orthonormal-frame bases)."""

    gamma_basis: np.ndarray   # (n, mu)
    mu: int
    delta_basis: np.ndarray   # (n, nu)
    nu: int


@dataclass
class StructureReport:
    """Per-point summary of the splitting analysis (JSON-serializable)."""

    point: list
    stratum: str
    mu: int
    nu: int
    C_norm: float
    wT: float
    composition_ok: bool
    leaf_kappa: float | None = None

    def row(self) -> dict:
        return {
            "point": self.point, "stratum": self.stratum, "mu": self.mu,
            "nu": self.nu, "C_norm": self.C_norm, "wT": self.wT,
            "composition_ok": self.composition_ok,
            "leaf_kappa": self.leaf_kappa,
        }


def nullity(chart, u, rank_tol: float = 1e-7) -> NullityData:
    """Curvature nullity Gamma = ker(u -> R(., .)u) plus relative nullity.

    Gamma comes from the singular spectrum of the curvature tensor viewed
    as a map into 3-tensors; the relative nullity from the stacked shape
    operators.  AmbiguousRank is raised when a singular value falls within
    a decade of its cutoff.
    """
    u = np.atleast_2d(np.asarray(u, dtype=float))
    curv = curvature_data(chart, u)
    R = curv.riem_on[0]
    n = R.shape[0]
    M = R.reshape(n * n * n, n)
    sv = np.linalg.svd(M, compute_uv=False)
    smax = max(sv[0], 1e-300)
    cut = rank_tol * smax
    if smax > 1e-12 and np.any((sv > cut / 10) & (sv < cut * 10)):
        raise AmbiguousRank("nullity rank is tolerance-ambiguous")
    mu = int((sv < cut).sum()) if smax > 1e-12 else n
    _, _, Vt = np.linalg.svd(M)
    gamma_basis = Vt[n - mu:].T if mu else np.zeros((n, 0))

    wb = weinstein_batch(frame_batch(chart, u))
    res = classify_batch(wb)
    if res["ambiguous"][0]:
        raise AmbiguousRank("relative nullity rank is tolerance-ambiguous")
    nu = int(res["nu"][0])
    stack = np.concatenate([wb.A[0], wb.B[0]], axis=0)
    _, _, Vt2 = np.linalg.svd(stack)
    delta_basis = Vt2[n - nu:].T if nu else np.zeros((n, 0))
    return NullityData(gamma_basis=gamma_basis, mu=mu,
                       delta_basis=delta_basis, nu=nu)


class NullityLine:
    """Unit nullity direction field on a mu = 1 region.

    Uses the Gauss-equation Ricci tensor sum_m (tr A_m) A_m - A_m^2 (valid
    in any orthonormal normal basis): on the probed strata its kernel equals
    the curvature nullity, and it needs only order-2 jets, which keeps leaf
    tracing cheap.  Directions are chart-coordinate vectors, unit for the
    induced metric, sign-aligned to the base point.
    """

    def __init__(self, chart, u0, gap_tol: float = 1e-5):
        self.chart = chart
        self.gap_tol = gap_tol
        self._ref = None
        nd = nullity(chart, np.atleast_2d(u0))
        if nd.mu != 1:
            raise NullityNotLine(f"mu = {nd.mu} at the base point")
        self._ref = self.at(np.atleast_2d(u0))[0][0]

    def at(self, u):
        """(directions (B, n), density |alpha(T, T)| (B,)) for unit nullity T."""
        fb = frame_batch(self.chart, u)
        ric = ricci_from_shape(fb.alpha[..., 0], fb.alpha[..., 1])
        evals, evecs = np.linalg.eigh(ric)
        scale = np.maximum(np.abs(evals).max(axis=1), 1e-300)
        if np.any(evals[:, 1] < self.gap_tol * scale):
            raise NullityNotLine("Ricci kernel is not one-dimensional")
        k_on = evecs[:, :, 0]
        v = np.einsum("bic,bc->bi", fb.metric.frame, k_on)
        if self._ref is not None:
            g = fb.metric.g
            sign = np.sign(np.einsum("bi,bij,j->b", v, g, self._ref))
            v = v * np.where(sign == 0, 1.0, sign)[:, None]
        aTT = np.einsum("bacm,ba,bc->bm", fb.alpha, k_on, k_on)
        return v, np.linalg.norm(aTT, axis=1)

    def __call__(self, u):
        return self.at(np.atleast_2d(u))[0]


def splitting_tensor(chart, u, X, h: float = DEFAULT_STEP,
                     line: NullityLine | None = None) -> np.ndarray:
    """C X = -(nabla_X T) projected to the complement of T, chart coordinates.

    Central differences of the unit nullity field with one Richardson step;
    the Christoffel correction completes the covariant derivative.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    X = np.asarray(X, dtype=float)
    line = line or NullityLine(chart, u)
    fb = frame_batch(chart, u[None, :])
    g = fb.metric.g[0]
    gamma = fb.metric.gamma[0]
    T0 = line(u[None, :])[0]

    def diff(step):
        Tv = line(np.stack([u + step * X, u - step * X], axis=0))
        return (Tv[0] - Tv[1]) / (2.0 * step)

    dTX = (4.0 * diff(h / 2.0) - diff(h)) / 3.0
    nab = dTX + np.einsum("kim,i,m->k", gamma, X, T0)
    CX = -nab
    return CX - (CX @ g @ T0) * T0


def splitting_norm(chart, u, h: float = DEFAULT_STEP,
                   line: NullityLine | None = None) -> float:
    """max |C X|_g over a g-orthonormal basis of the complement of T."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    line = line or NullityLine(chart, u)
    fb = frame_batch(chart, u[None, :])
    g = fb.metric.g[0]
    E = fb.metric.frame[0]
    T0 = line(u[None, :])[0]
    worst = 0.0
    for a in range(chart.n):
        X = E[:, a]
        X = X - (X @ g @ T0) * T0
        nrm = np.sqrt(max(X @ g @ X, 0.0))
        if nrm < 1e-8:
            continue
        CX = splitting_tensor(chart, u, X / nrm, h, line)
        worst = max(worst, float(np.sqrt(CX @ g @ CX)))
    return worst


def _transport_basis(chart, path_points, V0):
    """Parallel transport of column vectors V0 along a discrete path (RK2)."""
    V = V0.copy()
    out = [V.copy()]
    for a, b in zip(path_points[:-1], path_points[1:]):
        mid = 0.5 * (a + b)
        dt = b - a
        G_a = frame_batch(chart, a[None, :]).metric.gamma[0]
        G_m = frame_batch(chart, mid[None, :]).metric.gamma[0]
        k1 = -np.einsum("kim,i,mj->kj", G_a, dt, V)
        k2 = -np.einsum("kim,i,mj->kj", G_m, dt, V + 0.5 * k1)
        V = V + k2
        out.append(V.copy())
    return out


def riccati_residual(chart, leaf_points) -> float:
    """max || C' - C^2 || along a unit-speed nullity geodesic segment.

    The splitting tensor is written in a parallel-transported orthonormal
    basis of the complement of T; C' is a central difference of that matrix
    curve in the arclength parameter.
    """
    pts = np.asarray(leaf_points, dtype=float)
    if len(pts) < 3:
        raise ValueError("need at least three leaf samples")
    line = NullityLine(chart, pts[0])
    fb0 = frame_batch(chart, pts[0][None, :])
    g0 = fb0.metric.g[0]
    T0 = line(pts[0][None, :])[0]
    E = fb0.metric.frame[0]
    basis = []
    for a in range(chart.n):
        X = E[:, a] - (E[:, a] @ g0 @ T0) * T0
        for Y in basis:
            X = X - (X @ g0 @ Y) * Y
        nrm = np.sqrt(max(X @ g0 @ X, 0.0))
        if nrm > 1e-6:
            basis.append(X / nrm)
    basis = np.stack(basis, axis=1)
    frames = _transport_basis(chart, pts, basis)

    arc = np.concatenate([[0.0], np.cumsum(
        np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    Cmats = []
    for p, F in zip(pts, frames):
        fb = frame_batch(chart, p[None, :])
        g = fb.metric.g[0]
        Tp = line(p[None, :])[0]
        cols = []
        for j in range(F.shape[1]):
            X = F[:, j] - (F[:, j] @ g @ Tp) * Tp
            CX = splitting_tensor(chart, p, X, line=line)
            cols.append([CX @ g @ F[:, i] for i in range(F.shape[1])])
        Cmats.append(np.array(cols).T)
    worst = 0.0
    for i in range(1, len(pts) - 1):
        dt = arc[i + 1] - arc[i - 1]
        Cp = (Cmats[i + 1] - Cmats[i - 1]) / dt
        worst = max(worst, float(np.linalg.norm(Cp - Cmats[i] @ Cmats[i])))
    return worst


def connection_form(chart, u, X=None, h: float = DEFAULT_STEP):
    """w(X) = <nabla-perp_X xi, eta>; all coordinate values, or one X."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    field = FrameField(chart, u)
    w = field.w_coord(u, h)
    if X is None:
        return w
    return float(np.asarray(X, dtype=float) @ w)


def w_along_nullity(chart, u, h: float = DEFAULT_STEP) -> float:
    """|w(T)| for the unit nullity direction T at u."""
    line = NullityLine(chart, np.atleast_1d(u))
    T = line(np.atleast_2d(u))[0]
    return abs(connection_form(chart, u, X=T, h=h))


def composition_criterion(chart, samples, tol: float = 1e-6,
                          rank_tol: float = 1e-7):
    """ker B subset ker w at every sample: the local composition test.

    Samples must lie in the rank-(n-1, 1) stratum with a smooth frame
    (NullityNotLine / FrameNotSmooth otherwise).  Returns (ok, worst) with
    worst = max |w(v)| over unit v in ker B, normalized by 1 + |w|_g.
    """
    worst = 0.0
    for u in np.atleast_2d(np.asarray(samples, dtype=float)):
        field = FrameField(chart, u)
        _, _, xi, eta, fb = field.shape_coord(u[None, :])
        g = fb.metric.g[0]
        E = fb.metric.frame[0]
        # the rank-one operator may sit on either frame leg; pick it
        ops = []
        for nu_vec in (eta[0], xi[0]):
            alpha_nu = np.einsum("aij,a->ij", fb.F2[0], nu_vec)
            ops.append(np.einsum("ia,jc,ij->ac", E, E, alpha_nu))
        svs = [np.linalg.svd(op, compute_uv=False) for op in ops]
        rank1 = [sv[0] > 1e-12 and sv[1] <= 10 * rank_tol * sv[0] for sv in svs]
        if not any(rank1):
            raise NullityNotLine("sample not in the rank-one-B stratum")
        B_on = ops[0] if rank1[0] else ops[1]
        _, _, Vt = np.linalg.svd(B_on)
        kerB_on = Vt[1:, :]
        kerB = E @ kerB_on.T
        w = field.w_coord(u, h=DEFAULT_STEP)
        L = np.linalg.cholesky(g)
        wnorm = np.linalg.norm(np.linalg.solve(L, w))
        for j in range(kerB.shape[1]):
            v = kerB[:, j]
            v = v / np.sqrt(v @ g @ v)
            worst = max(worst, abs(float(w @ v)) / (1.0 + wnorm))
    return worst <= tol, worst


def trace_leaf_batch(chart, starts, period_hint: float, h: float | None = None,
                     max_laps: float = 2.8, wrap=None):
    """Follow the unit nullity field from many starts until ambient closure.

    RK4 on the chart-coordinate field with trapezoidal accumulation of the
    bending density |alpha(T, T)|; closure is a local minimum of the ambient
    distance to the start below a few step lengths, refined by parabolic
    interpolation.  ``wrap`` re-enters the fundamental window through deck
    maps (directions are transported through it by differencing).

    Returns dict with ``closed`` (bool), ``length`` and ``kappa`` arrays.
    """
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    B = starts.shape[0]
    line = NullityLine(chart, starts[0])
    h = h or period_hint / 1200.0
    steps = int(np.ceil(max_laps * period_hint / h)) + 3
    pos0 = chart.values(starts)

    def field(pts, ref):
        v, dens = line.at(pts)
        sign = np.sign(np.einsum("bi,bi->b", v, ref))
        return v * np.where(sign == 0, 1.0, sign)[:, None], dens

    def apply_wrap(u, d):
        if wrap is None:
            return u, d
        u2 = wrap(u)
        moved = np.any(u2 != u, axis=1)
        if np.any(moved):
            delta = 1e-6
            d2 = (wrap(u + delta * d) - u2) / delta
            d = np.where(moved[:, None], d2, d)
        return u2, d

    u = starts.copy()
    prev_dir, dens_prev = field(u, line(u))
    length = np.zeros(B)
    kappa = np.zeros(B)
    closed = np.zeros(B, dtype=bool)
    res_len = np.full(B, np.nan)
    res_kap = np.full(B, np.nan)
    d_hist = [None, None, np.zeros(B)]
    lk_hist = [None, None, (length.copy(), kappa.copy())]
    close_tol = 8.0 * h

    for _ in range(steps):
        act = ~closed
        if not act.any():
            break
        k1 = prev_dir
        k2, _ = field(u + 0.5 * h * k1, k1)
        k3, _ = field(u + 0.5 * h * k2, k1)
        k4, _ = field(u + h * k3, k1)
        un = u + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        un, dir_guess = apply_wrap(un, k4)
        if not np.all(chart.contains(un[act], margin=0.0)):
            bad = un[act][~chart.contains(un[act], margin=0.0)][0]
            raise LeafNotClosed(f"leaf left the chart box near {bad}")
        dir_new, dens_new = field(un, dir_guess)
        step_len = np.where(act, h, 0.0)
        length = length + step_len
        kappa = kappa + np.where(act, 0.5 * (dens_prev + dens_new) * h, 0.0)
        u = np.where(act[:, None], un, u)
        prev_dir = np.where(act[:, None], dir_new, prev_dir)
        dens_prev = np.where(act, dens_new, dens_prev)

        d = np.linalg.norm(chart.values(u) - pos0, axis=1)
        d_hist = [d_hist[1], d_hist[2], d]
        lk_hist = [lk_hist[1], lk_hist[2], (length.copy(), kappa.copy())]
        if d_hist[0] is not None:
            dm, d0, dp = d_hist
            lmid = lk_hist[1][0]
            dip = (act & (d0 < close_tol) & (d0 <= dm) & (d0 < dp)
                   & (lmid > 0.3 * period_hint))
            if np.any(dip):
                # parabolic refinement of the closest-approach offset
                den = dm - 2 * d0 + dp
                off = np.where(np.abs(den) > 1e-300,
                               0.5 * (dm - dp) / np.where(den == 0, 1, den), 0.0)
                off = np.clip(off, -1.0, 1.0)
                res_len[dip] = (lk_hist[1][0] + off * h)[dip]
                res_kap[dip] = (lk_hist[1][1] + off * h * dens_prev)[dip]
                closed[dip] = True
    return {"closed": closed, "length": res_len, "kappa": res_kap}


def trace_leaf(chart, u0, period_hint: float, h: float | None = None,
               wrap=None):
    """Single-leaf convenience wrapper; raises LeafNotClosed on failure."""
    res = trace_leaf_batch(chart, np.atleast_2d(u0), period_hint, h=h,
                           wrap=wrap)
    if not res["closed"][0]:
        raise LeafNotClosed("leaf did not return to its start")
    return float(res["length"][0]), float(res["kappa"][0])


def leaf_total_curvature(chart, u0, period_hint: float, wrap=None,
                         rel_tol: float = 1e-6) -> float:
    """Total curvature of the closed leaf through u0, step-refined to rel_tol."""
    _, k1 = trace_leaf(chart, u0, period_hint, h=period_hint / 1200.0, wrap=wrap)
    _, k2 = trace_leaf(chart, u0, period_hint, h=period_hint / 2400.0, wrap=wrap)
    if abs(k2 - k1) <= rel_tol * max(abs(k2), 1.0):
        return k2
    _, k3 = trace_leaf(chart, u0, period_hint, h=period_hint / 4800.0, wrap=wrap)
    if abs(k3 - k2) > rel_tol * max(abs(k3), 1.0):
        raise LeafNotClosed("leaf curvature did not converge")
    return k3
