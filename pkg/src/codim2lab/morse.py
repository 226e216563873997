"""Height-function Morse data and the type-number estimators.

Type numbers are produced by two independent routes and cross-checked:

* ``tau_by_morse``      -- Monte Carlo average over height directions of the
  per-index critical point counts, found by dense seeding plus Newton;
* ``tau_by_quadrature`` -- product quadrature of |det A_beta| over the unit
  normal bundle, bucketed by the index of A_beta;
* ``tau_by_leaf_formula`` -- for M = K u U_1 structures: the cross-section
  integral of Gauss curvature times leaf total curvature over 8 pi^2.

Critical points are deduplicated by ambient position together with the
tangent projector, so immersed (self-intersecting) examples count
preimages, not image points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .curvature import curvature_data
from .errors import DegenerateCritical
from .extrinsic import frame_batch
from .quadrature import gauss_legendre, sphere_volume
from .structure import NullityLine, trace_leaf_batch

DEFAULT_COND_CAP = 1e8
DEDUP_FACTOR = 1e-5


@dataclass
class CriticalPoint:
    chart_label: str
    u: np.ndarray
    position: np.ndarray
    index: int
    cond: float


@dataclass
class MorseProfile:
    v: np.ndarray
    critical_points: list
    mu: np.ndarray

    @property
    def total(self) -> int:
        return int(self.mu.sum())


@dataclass
class TypeNumberReport:
    tau: np.ndarray
    stderr: np.ndarray
    method: str
    chen_gap: float = float("nan")
    wide: bool = False
    tight: bool = False
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "tau": [float(t) for t in self.tau],
            "stderr": [float(s) for s in self.stderr],
            "method": self.method,
            "chen_gap": float(self.chen_gap),
            "wide": bool(self.wide),
            "tight": bool(self.tight),
            **{k: v for k, v in self.details.items()},
        }


def _newton_critical_points(chart, v, seeds, newton_tol=1e-11, iters=60):
    """Batched Newton for the zeros of grad(h_v o chart) from seed points."""
    u = np.array(seeds, dtype=float)
    box_lo = np.array([b[0] for b in chart.box])
    box_hi = np.array([b[1] for b in chart.box])
    span = float(np.max(box_hi - box_lo))
    for it in range(iters):
        out = chart.jets(u, order=2)
        F1 = np.stack([j.d1 for j in out], axis=1)
        F2 = np.stack([j.d2 for j in out], axis=1)
        grad = np.einsum("a,bai->bi", v, F1)
        hess = np.einsum("a,baij->bij", v, F2)
        ok = np.isfinite(grad).all(axis=1) & np.isfinite(hess).all(axis=(1, 2))
        hess = np.where(ok[:, None, None], hess, np.eye(chart.n))
        # pseudo-inverse step: singular Hessian directions (flat regions)
        # simply stop contributing, and those seeds fail the gradient test
        step = np.einsum("bij,bj->bi", np.linalg.pinv(hess, rcond=1e-13), grad)
        step = np.where(ok[:, None], step, 0.0)
        lens = np.linalg.norm(step, axis=1)
        cap = 0.25 * span
        scale = np.where(lens > cap, cap / np.maximum(lens, 1e-300), 1.0)
        u = u - step * scale[:, None]
        inside = chart.contains(u, margin=0.05 * span) & ok
        u = u[inside]
        if u.size == 0:
            return u
        gnorm = np.linalg.norm(grad[inside], axis=1)
        if it >= 4 and (it % 4 == 0):
            # collapse near-duplicate iterates to keep the batch small
            key = np.round(u / (1e-3 * span)).astype(np.int64)
            _, first = np.unique(key, axis=0, return_index=True)
            u = u[np.sort(first)]
        if it > 6 and np.all(gnorm < newton_tol):
            break
    out = chart.jets(u, order=2)
    F1 = np.stack([j.d1 for j in out], axis=1)
    grad = np.einsum("a,bai->bi", v, F1)
    keep = (np.linalg.norm(grad, axis=1) < newton_tol) & chart.accepts(u)
    return u[keep]


def _dedup_keys(chart, u):
    """Ambient position plus scaled tangent projector for orbit-safe dedup."""
    out = chart.jets(u, order=1)
    pos = np.stack([j.f for j in out], axis=1)
    F1 = np.stack([j.d1 for j in out], axis=1)
    Q, _ = np.linalg.qr(F1)
    proj = np.einsum("bam,bcm->bac", Q, Q)
    B = pos.shape[0]
    return np.concatenate([pos, 0.2 * proj.reshape(B, -1)], axis=1), pos


def morse_profile(atlas, v, seeds_per_chart=None, newton_tol: float = 1e-11,
                  cond_cap: float = DEFAULT_COND_CAP) -> MorseProfile:
    """All critical points of the height function h_v over the atlas.

    Newton refinement from per-chart seed grids, ambient deduplication
    across charts (one count per deck orbit since f is deck-invariant), and
    a double index computation: the coordinate Hessian inertia must agree
    with the index of the normal-component shape operator A_{v_N}.  Raises
    DegenerateCritical when a critical point fails the conditioning cap or
    the two indices disagree.
    """
    v = np.asarray(v, dtype=float)
    n = atlas.n
    found_u = []
    found_chart = []
    for chart in atlas.charts:
        counts = seeds_per_chart or getattr(chart, "newton_seeds", None)
        if counts is None:
            per = max(4, int(round(1400 ** (1.0 / chart.n))))
            counts = (per,) * chart.n
        seeds = chart.grid(counts)
        u = _newton_critical_points(chart, v, seeds, newton_tol)
        for row in u:
            found_u.append(row)
            found_chart.append(chart)
    if not found_u:
        return MorseProfile(v=v, critical_points=[], mu=np.zeros(n + 1, dtype=int))

    keys = []
    positions = []
    for chart, u in zip(found_chart, found_u):
        k, p = _dedup_keys(chart, u[None, :])
        keys.append(k[0])
        positions.append(p[0])
    keys = np.array(keys)
    positions = np.array(positions)
    diam = getattr(atlas, "_diam_cache", None)
    if diam is None:
        diam = atlas.diameter()
        atlas._diam_cache = diam
    radius = max(DEDUP_FACTOR * diam, 1e-9)
    tree = cKDTree(keys)
    pairs = tree.query_pairs(r=radius, output_type="ndarray")
    m = len(keys)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])),
                       shape=(m, m))
    ncomp, labels = connected_components(graph, directed=False)

    crit = []
    mu = np.zeros(n + 1, dtype=int)
    for c in range(ncomp):
        members = np.nonzero(labels == c)[0]
        i = members[0]
        chart, u = found_chart[i], found_u[i]
        fb = frame_batch(chart, u[None, :])
        # Hessian at a critical point in the orthonormal frame = A_{v_N}
        vN = np.einsum("a,bam->bm", v, fb.normals)[0]
        AvN = fb.alpha[0] @ vN
        eig = np.linalg.eigvalsh(AvN)
        aeig = np.abs(eig)
        cond = float(aeig.max() / max(aeig.min(), 1e-300))
        index_on = int((eig < 0).sum())
        out = chart.jets(u[None, :], order=2)
        hess = np.einsum("a,baij->ij", v, np.stack([j.d2 for j in out], axis=1))
        index_coord = int((np.linalg.eigvalsh(hess) < 0).sum())
        if cond > cond_cap:
            raise DegenerateCritical(
                f"critical point condition number {cond:.2e} exceeds cap")
        if index_on != index_coord:
            raise DegenerateCritical(
                f"index mismatch {index_on} vs {index_coord} (near-degenerate)")
        crit.append(CriticalPoint(chart_label=chart.label, u=u,
                                  position=positions[i], index=index_on,
                                  cond=cond))
        mu[index_on] += 1
    return MorseProfile(v=v, critical_points=crit, mu=mu)


def random_directions(count: int, dim: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((count, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def tau_by_morse(atlas, num_directions: int = 200, seed: int = 0,
                 reject_cap: float = 0.01, **profile_kw) -> TypeNumberReport:
    """Monte Carlo spherical average of the index counts mu_k(v).

    Degenerate directions (conditioning failures) are rejected and
    resampled; the run fails if more than ``reject_cap`` of the draws are
    rejected, since that signals systematically degenerate geometry.
    """
    n = atlas.n
    dirs = random_directions(num_directions, n + 2, seed)
    extra_seed = seed + 1
    mus = []
    rejected = 0
    for v in dirs:
        while True:
            try:
                prof = morse_profile(atlas, v, **profile_kw)
            except DegenerateCritical:
                rejected += 1
                if rejected > max(1, reject_cap * num_directions):
                    raise DegenerateCritical(
                        f"rejected {rejected} directions (cap "
                        f"{reject_cap:.0%} of {num_directions})")
                v = random_directions(1, n + 2, extra_seed)[0]
                extra_seed += 1
                continue
            break
        mus.append(prof.mu)
    mus = np.array(mus, dtype=float)
    tau = mus.mean(axis=0)
    stderr = mus.std(axis=0, ddof=1) / math.sqrt(len(mus)) if len(mus) > 1 \
        else np.zeros(n + 1)
    return TypeNumberReport(tau=tau, stderr=stderr, method="MorseAverage",
                            details={"directions": int(len(mus)),
                                     "rejected": int(rejected),
                                     "seed": int(seed)})


def _quad_nodes(chart, counts):
    """Tensor Gauss-Legendre nodes and weights over the chart sample box."""
    axes = []
    wts = []
    for (lo, hi), c in zip(chart.sample_box, counts):
        x, w = gauss_legendre(int(c))
        half = 0.5 * (hi - lo)
        axes.append(lo + half * (x + 1.0))
        wts.append(half * w)
    mesh = np.meshgrid(*axes, indexing="ij")
    wmesh = np.meshgrid(*wts, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    w = np.prod(np.stack([m.ravel() for m in wmesh], axis=1), axis=1)
    return pts, w


def _tau_quadrature_once(atlas, counts_scale: float, theta_cells: int,
                         chunk: int = 8192):
    n = atlas.n
    tau = np.zeros(n + 1)
    tx, tw = gauss_legendre(6)
    for chart in atlas.quad_charts:
        counts = getattr(chart, "quad_counts", None) or (12,) * chart.n
        counts = tuple(max(2, int(round(c * counts_scale))) for c in counts)
        pts, w = _quad_nodes(chart, counts)
        for start in range(0, len(pts), chunk):
            P = pts[start:start + chunk]
            W = w[start:start + chunk]
            fb = frame_batch(chart, P)
            vol = np.sqrt(np.linalg.det(fb.metric.g))
            A0 = fb.alpha[..., 0]
            A1 = fb.alpha[..., 1]
            edges = np.linspace(0.0, 2.0 * math.pi, theta_cells + 1)
            for c0, c1 in zip(edges[:-1], edges[1:]):
                half = 0.5 * (c1 - c0)
                for node, wt in zip(tx, tw):
                    th = c0 + half * (node + 1.0)
                    Ab = math.cos(th) * A0 + math.sin(th) * A1
                    eig = np.linalg.eigvalsh(Ab)
                    det = np.prod(eig, axis=1)
                    idx = (eig < 0).sum(axis=1)
                    contrib = np.abs(det) * vol * W * (half * wt)
                    for k in range(n + 1):
                        sel = idx == k
                        if sel.any():
                            tau[k] += contrib[sel].sum()
    return tau / sphere_volume(n + 1)


def tau_by_quadrature(atlas, point_grid: int | None = None,
                      theta_grid: int = 64) -> TypeNumberReport:
    """Normal-bundle quadrature of |det A_beta| bucketed by index.

    ``point_grid`` is a total node budget across the manifold directions
    (each quad chart's default per-dimension counts are scaled to meet it);
    ``theta_grid`` the number of composite cells on the normal circle.  The
    reported stderr is the difference against a half-resolution pass plus a
    small floor, an embedded error estimate.
    """
    scale = 1.0
    if point_grid is not None:
        base = 1.0
        for chart in atlas.quad_charts:
            counts = getattr(chart, "quad_counts", None) or (12,) * chart.n
            base = max(base, float(np.prod(counts)))
        scale = (point_grid / base) ** (1.0 / atlas.n)
    tau = _tau_quadrature_once(atlas, scale, theta_grid)
    tau_half = _tau_quadrature_once(atlas, scale * 0.55, max(8, theta_grid // 2))
    stderr = np.abs(tau - tau_half) + 1e-4
    return TypeNumberReport(tau=tau, stderr=stderr, method="NormalQuadrature",
                            details={"theta_grid": int(theta_grid)})


def tau_by_leaf_formula(atlas, cross_counts=(10, 10), leaf_nodes: int = 6,
                        trace_resolution: int = 420) -> TypeNumberReport:
    """Leaf formula for M = K u U_1 structures in R^5.

    Integrates (sectional curvature of the leaf-orthogonal plane) times
    (total curvature / length of the leaf) over the nonflat components and
    divides by 8 pi^2.  Exact when every nonflat point has nullity one and
    all leaves close under deck maps, which the tracer verifies pointwise.
    """
    if atlas.n != 3 or not getattr(atlas, "leaf_structure", None):
        raise ValueError("leaf formula needs an n = 3 atlas with leaf data")
    total = 0.0
    details = {"components": []}
    for comp in atlas.leaf_structure:
        chart = comp["chart"]
        (i, j) = comp["cross_axes"]
        k = comp["leaf_axis"]
        (alo, ahi), (blo, bhi) = comp["cross_box"]
        xa, wa = gauss_legendre(cross_counts[0])
        xb, wb = gauss_legendre(cross_counts[1])
        A, B = np.meshgrid(alo + 0.5 * (ahi - alo) * (xa + 1),
                           blo + 0.5 * (bhi - blo) * (xb + 1), indexing="ij")
        WA, WB = np.meshgrid(0.5 * (ahi - alo) * wa, 0.5 * (bhi - blo) * wb,
                             indexing="ij")
        cross = np.zeros((A.size, chart.n))
        cross[:, i] = A.ravel()
        cross[:, j] = B.ravel()
        cross[:, k] = comp["leaf_anchor"]

        res = trace_leaf_batch(chart, cross, comp["period_hint"],
                               h=comp["period_hint"] / trace_resolution,
                               wrap=comp.get("wrap"))
        if not np.all(res["closed"]):
            raise ValueError("a leaf failed to close during the formula pass")
        ratio = res["kappa"] / res["length"]

        curv = curvature_data(chart, cross)
        line = NullityLine(chart, cross[0])
        T = line(cross)
        # K of the plane orthogonal to T: dual 2-form coefficients (Hodge)
        L = np.linalg.cholesky(curv.metric.g)
        t_on = np.einsum("bji,bj->bi", L, T)
        omega = np.stack([t_on[:, 2], -t_on[:, 1], t_on[:, 0]], axis=1)
        K = np.einsum("bpq,bp,bq->b", curv.rhat, omega, omega)

        # leaf-axis measure: integrate sqrt(det g) along the leaf coordinate
        xk, wk = gauss_legendre(leaf_nodes)
        (klo, khi) = chart.sample_box[k]
        kvals = klo + 0.5 * (khi - klo) * (xk + 1)
        kwts = 0.5 * (khi - klo) * wk
        comp_total = 0.0
        h_cross = K * ratio
        for kv, kw in zip(kvals, kwts):
            pts = cross.copy()
            pts[:, k] = kv
            fb = frame_batch(chart, pts)
            vol = np.sqrt(np.linalg.det(fb.metric.g))
            comp_total += float(np.sum(h_cross * vol * (WA.ravel() * WB.ravel())) * kw)
        total += comp_total
        details["components"].append({
            "kappa_mean": float(np.nanmean(res["kappa"])),
            "length_mean": float(np.nanmean(res["length"])),
            "contribution": comp_total / (8.0 * math.pi ** 2),
        })
    val = total / (8.0 * math.pi ** 2)
    n = atlas.n
    tau = np.full(n + 1, val)
    stderr = np.full(n + 1, 5e-3)
    return TypeNumberReport(tau=tau, stderr=stderr, method="LeafFormula",
                            details=details)


def chen_and_wide(report: TypeNumberReport, metadata=None,
                  floor: float = 5e-3) -> TypeNumberReport:
    """Fill in the Chen gap, wideness and tightness verdicts.

    chen_gap = tau_0 + tau_n - sum of the middle taus; wide when the gap
    vanishes within three combined error bars; tight when the total tau sum
    matches the metadata target (minimal total critical-point count of a
    generic height function) within the same tolerance.
    """
    tau = report.tau
    gap = float(tau[0] + tau[-1] - tau[1:-1].sum())
    tol = 3.0 * float(report.stderr.sum()) + floor
    report.chen_gap = gap
    report.wide = abs(gap) <= tol
    if gap < -tol:
        report.details["chen_violated"] = True
    if metadata is not None and metadata.tight_target is not None:
        report.tight = abs(float(tau.sum()) - metadata.tight_target) <= max(tol, 0.05)
        report.details["tight_target"] = int(metadata.tight_target)
    report.details["tau_symmetry_defect"] = float(
        np.abs(tau - tau[::-1]).max())
    return report
