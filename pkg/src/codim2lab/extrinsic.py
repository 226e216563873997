"""Extrinsic invariants of codimension-two immersions.

From second-order chart jets this module produces the second fundamental
form in an orthonormal tangent frame, the quadrant-adapted normal frame
(xi, eta) that makes both shape operators A, B positive semidefinite when
the curvature is nonnegative, the point classification into relative-nullity
and U_k strata, and the residuals of the Gauss, Codazzi and Ricci equations.

The normal frame is computed per point from the angular hull of the cone
{alpha(X, X)}.  Where that cone is a full quarter circle the frame is forced
(unique); narrower cones give a bisecting frame flagged non-unique, and the
frame-derivative residuals refuse to run there.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curvature import curvature_data, metric_data
from .errors import AmbiguousRank, FrameNotSmooth, NoQuadrantFrame, RankDeficient

DEFAULT_RANK_TOL = 1e-7
#: curvature magnitude below which a point is reported flat
DEFAULT_FLAT_TOL = 1e-2
#: angular slack for cone-width decisions (radians)
DEFAULT_ANGLE_TOL = 1e-4


@dataclass
class FrameBatch:
    """Batched extrinsic data at sampled points.

    ``tangent`` columns are an ambient orthonormal basis of the tangent
    space tied to the chart coordinates (frame = coordinate combination
    L^{-T}); ``normals`` an arbitrary orthonormal normal basis; ``alpha``
    the second fundamental form in the orthonormal tangent frame with
    components along ``normals``.
    """

    u: np.ndarray
    pos: np.ndarray
    tangent: np.ndarray      # (B, n+2, n)
    normals: np.ndarray      # (B, n+2, 2)
    alpha: np.ndarray        # (B, n, n, 2)
    metric: object
    F2: np.ndarray


@dataclass
class WeinsteinBatch:
    """Quadrant-adapted frames and shape operators at sampled points."""

    frames: FrameBatch
    xi: np.ndarray           # (B, n+2)
    eta: np.ndarray
    A: np.ndarray            # (B, n, n), symmetric, PSD up to tolerance
    B: np.ndarray
    psi: np.ndarray          # rotation angle from the raw normal basis
    width: np.ndarray        # angular width of the alpha cone
    unique: np.ndarray       # bool, frame forced by the geometry
    degenerate: np.ndarray   # bool, alpha numerically zero (flat point)
    ok: np.ndarray           # bool, cone fits in a quarter circle


@dataclass
class ShapeFrame:
    """Single-point view of the Weinstein frame."""

    p: np.ndarray
    tangent: np.ndarray
    xi: np.ndarray
    eta: np.ndarray
    A: np.ndarray
    B: np.ndarray
    unique: bool
    width: float


@dataclass
class PointClass:
    """Stratum label plus flags for one point."""

    stratum: str             # "RelNullity" or "U_k"
    k: int                   # rank of B after the rank-ordering swap
    nu: int                  # dim(ker A  intersect  ker B)
    rank_a: int
    rank_b: int
    flat: bool
    locally_wide_ok: bool


def frame_batch(chart, u, order: int = 2) -> FrameBatch:
    """Tangent/normal frames and the second fundamental form at ``u``."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    out = chart.jets(u, order)
    pos = np.stack([j.f for j in out], axis=1)
    F1 = np.stack([j.d1 for j in out], axis=1)
    F2 = np.stack([j.d2 for j in out], axis=1)
    sv = np.linalg.svd(F1, compute_uv=False)
    if np.any(sv[:, -1] <= 1e-10 * sv[:, 0]):
        raise RankDeficient("chart differential is rank deficient at a sampled point")
    md = metric_data(F1, F2)
    U, _, _ = np.linalg.svd(F1)
    normals = U[:, :, chart.n:]
    # second fundamental form: normal projection of the second derivatives
    alpha_nu = np.einsum("baij,bam->bijm", F2, normals)
    E = md.frame
    alpha = np.einsum("bia,bjc,bijm->bacm", E, E, alpha_nu)
    tangent = np.einsum("bai,bic->bac", F1, E)
    return FrameBatch(u=u, pos=pos, tangent=tangent, normals=normals,
                      alpha=alpha, metric=md, F2=F2)


def fundamental_forms(chart, u):
    """Spec-facing wrapper: (MetricData, alpha) at one point or a batch."""
    fb = frame_batch(chart, u)
    return fb.metric, fb.alpha


def _lam_min(alpha, phi):
    """Smallest eigenvalue of cos(phi) alpha_1 + sin(phi) alpha_2, batched."""
    M = (np.cos(phi)[:, None, None] * alpha[..., 0]
         + np.sin(phi)[:, None, None] * alpha[..., 1])
    return np.linalg.eigvalsh(M)[:, 0]


def _cone_arc(alpha, grid: int = 128, iters: int = 48):
    """Exact angular width and center of the cone spanned by {alpha(X, X)}.

    Uses the polar characterization: the cone lies in the half plane with
    inward normal (cos phi, sin phi) iff cos(phi) alpha_1 + sin(phi) alpha_2
    is PSD.  The set of such phi is an arc; its length is pi minus the cone
    width and it shares the cone's center.  The arc endpoints are located on
    a grid and refined by bisection, so the width is accurate to eigenvalue
    precision rather than direction-sampling density.
    """
    B = alpha.shape[0]
    scale = np.abs(alpha).max(axis=(1, 2, 3))
    degenerate = scale <= 1e-300
    slack = 1e-11 * np.maximum(scale, 1e-300)

    phis = np.linspace(-np.pi, np.pi, grid, endpoint=False)
    lam = np.empty((B, grid))
    for g, phi in enumerate(phis):
        lam[:, g] = _lam_min(alpha, np.full(B, phi))
    inside = lam >= -slack[:, None]
    counts = inside.sum(axis=1)
    all_in = counts == grid
    none_in = counts == 0
    degenerate = degenerate | all_in

    # unroll the arc from the first outside index so it is contiguous
    first_out = np.argmax(~inside, axis=1)
    roll = (np.arange(grid)[None, :] + first_out[:, None]) % grid
    inside_rolled = np.take_along_axis(inside, roll, axis=1)
    idx = np.arange(grid)[None, :]
    big = np.where(inside_rolled, idx, grid + 1)
    small = np.where(inside_rolled, idx, -1)
    r_start = big.min(axis=1)
    r_end = small.max(axis=1)
    # the polar set of a genuine quadrant-compatible cone is one solid arc;
    # scattered inside points (e.g. an indefinite pencil whose polar set is
    # a line) mean no containing half plane exists
    contiguous = counts == np.maximum(r_end - r_start + 1, 0)
    none_in = none_in | (~contiguous & ~degenerate)
    step = 2.0 * np.pi / grid
    base = -np.pi + first_out * step

    def refine(lo, hi):
        lo = lo.copy()
        hi = hi.copy()
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            pos = _lam_min(alpha, mid) >= -slack
            lo = np.where(pos, lo, mid)
            hi = np.where(pos, mid, hi)
        return 0.5 * (lo + hi)

    # left endpoint: crossing in (base + (r_start-1) step, base + r_start step]
    safe = ~(degenerate | none_in)
    rs = np.where(safe, r_start, 1)
    re = np.where(safe, r_end, 2)
    lo_left = base + (rs - 1) * step
    hi_left = base + rs * step
    left = refine(lo_left, hi_left)
    lo_right = base + (re + 1) * step
    hi_right = base + re * step
    right = refine(lo_right, hi_right)

    arc = right - left
    width = np.where(degenerate, 0.0, np.where(none_in, np.pi, np.pi - arc))
    center = np.mod(0.5 * (left + right) + np.pi, 2.0 * np.pi) - np.pi
    center = np.where(degenerate, np.pi / 2.0, center)
    return width, center, degenerate, none_in


def weinstein_batch(fb: FrameBatch, angle_tol: float = DEFAULT_ANGLE_TOL) -> WeinsteinBatch:
    """Rotate the raw normal basis so the alpha cone sits in the first quadrant.

    The cone of alpha(X, X) values is located exactly through its polar arc
    (see _cone_arc); the returned frame bisects the cone, so a full quarter-
    circle cone pins the frame (unique) while a ray sits at 45 degrees.
    ``ok`` is False where the cone exceeds a quarter circle beyond tolerance,
    which violates the curvature assumption; callers decide whether to raise.
    """
    scale2 = np.abs(fb.F2).max(axis=(1, 2, 3))
    amag = np.abs(fb.alpha).max(axis=(1, 2, 3))
    tiny = amag <= 1e-12 * (1.0 + scale2)
    alpha = np.where(tiny[:, None, None, None], 0.0, fb.alpha)
    width, center, degenerate, none_in = _cone_arc(alpha)

    ok = (width <= np.pi / 2.0 + angle_tol) & ~none_in
    unique = (~degenerate) & ok & (width >= np.pi / 2.0 - angle_tol)
    psi = np.where(degenerate, np.pi / 4.0, center - np.pi / 4.0)

    c, s = np.cos(psi), np.sin(psi)
    xi = c[:, None] * fb.normals[:, :, 0] + s[:, None] * fb.normals[:, :, 1]
    eta = -s[:, None] * fb.normals[:, :, 0] + c[:, None] * fb.normals[:, :, 1]
    A = c[:, None, None] * fb.alpha[..., 0] + s[:, None, None] * fb.alpha[..., 1]
    Bm = -s[:, None, None] * fb.alpha[..., 0] + c[:, None, None] * fb.alpha[..., 1]
    return WeinsteinBatch(frames=fb, xi=xi, eta=eta, A=A, B=Bm, psi=psi,
                          width=width, unique=unique, degenerate=degenerate, ok=ok)


def weinstein_frame(chart, u, angle_tol: float = DEFAULT_ANGLE_TOL) -> ShapeFrame:
    """Single-point Weinstein frame; raises NoQuadrantFrame on bad geometry."""
    wb = weinstein_batch(frame_batch(chart, u), angle_tol)
    if not wb.ok[0]:
        raise NoQuadrantFrame(
            f"alpha cone width {wb.width[0]:.6f} exceeds pi/2; curvature "
            "condition violated at the probed point")
    return ShapeFrame(p=wb.frames.pos[0], tangent=wb.frames.tangent[0],
                      xi=wb.xi[0], eta=wb.eta[0], A=wb.A[0], B=wb.B[0],
                      unique=bool(wb.unique[0]), width=float(wb.width[0]))


def shape_operator(frame: ShapeFrame, theta: float) -> np.ndarray:
    """A_beta for beta = cos(theta) xi + sin(theta) eta."""
    return np.cos(theta) * frame.A + np.sin(theta) * frame.B


def lambda2(A: np.ndarray, pairs) -> np.ndarray:
    """Second exterior power on the basis {e_a ^ e_b : a < b}, batched."""
    if A.ndim == 2:
        A = A[None, ...]
    N = len(pairs)
    out = np.empty((A.shape[0], N, N))
    for p, (a, b) in enumerate(pairs):
        for q, (c, d) in enumerate(pairs):
            out[:, p, q] = A[:, a, c] * A[:, b, d] - A[:, a, d] * A[:, b, c]
    return out


def curvature_operator_from_shape(A, B, pairs) -> np.ndarray:
    """Extrinsic curvature operator Lambda^2 A + Lambda^2 B."""
    return lambda2(A, pairs) + lambda2(B, pairs)


def ricci_from_shape(A, B) -> np.ndarray:
    """Ricci tensor via the Gauss equation: (trA)A - A^2 + (trB)B - B^2."""
    tA = np.trace(A, axis1=-2, axis2=-1)[..., None, None]
    tB = np.trace(B, axis1=-2, axis2=-1)[..., None, None]
    return tA * A - A @ A + tB * B - B @ B


def _ranks_with_guard(s, cut, guard=10.0):
    """Rank = #(sv > cut); ambiguous where any sv is within a decade of cut."""
    rank = (s > cut[:, None]).sum(axis=1)
    near = np.any((s > cut[:, None] / guard) & (s < cut[:, None] * guard), axis=1)
    return rank, near


def classify_batch(wb: WeinsteinBatch, rank_tol: float = DEFAULT_RANK_TOL,
                   flat_tol: float = DEFAULT_FLAT_TOL):
    """Vectorized stratum classification.

    Returns a dict of arrays: nu, k, rank_a, rank_b, flat, wide_ok,
    rel_nullity (bool), ambiguous (bool).  Rank cutoffs are shared between
    A and B (scale = max of the two spectral norms) so that flat points do
    not report spurious full ranks.

    Where the frame is not unique (cone narrower than a quarter circle) the
    ranks are taken in the cone-centered frame instead of the bisecting one:
    a ray cone then reports B = 0 exactly ("U_0-like"), matching the strict
    curvature regime.  Kernels and the flat flag are frame independent.
    """
    c45 = np.sqrt(0.5)
    A_c = (wb.A + wb.B) * c45
    B_c = (wb.B - wb.A) * c45
    use_centered = ~wb.unique
    A = np.where(use_centered[:, None, None], A_c, wb.A)
    B = np.where(use_centered[:, None, None], B_c, wb.B)
    n = A.shape[1]
    sA = np.abs(np.linalg.eigvalsh(A))[:, ::-1]
    sB = np.abs(np.linalg.eigvalsh(B))[:, ::-1]
    scale = np.maximum(np.maximum(sA[:, 0], sB[:, 0]), 1e-300)
    cut = rank_tol * scale
    rank_a, amb_a = _ranks_with_guard(sA, cut)
    rank_b, amb_b = _ranks_with_guard(sB, cut)

    stack = np.concatenate([A, B], axis=1)
    s_stack = np.linalg.svd(stack, compute_uv=False)
    nu = (s_stack < cut[:, None]).sum(axis=1)
    amb_s = np.any((s_stack > cut[:, None] / 10) & (s_stack < cut[:, None] * 10), axis=1)

    # order so rank B <= rank A
    swap = rank_b > rank_a
    ra = np.where(swap, rank_b, rank_a)
    rb = np.where(swap, rank_a, rank_b)

    rhat = curvature_operator_from_shape(A, B, _pairs(n))
    rhat_norm = np.linalg.norm(rhat, axis=(1, 2))
    flat = rhat_norm <= flat_tol

    rel = nu >= 1
    complement = (~rel) & (ra + rb == n) & (ra >= 1) & (rb >= 1)
    wide_ok = rel | complement
    k = np.where(rel, 0, rb)
    ambiguous = amb_a | amb_b | amb_s
    return {
        "nu": nu, "k": k, "rank_a": ra, "rank_b": rb, "swap": swap,
        "flat": flat, "wide_ok": wide_ok, "rel_nullity": rel,
        "ambiguous": ambiguous, "rhat_norm": rhat_norm,
    }


def _pairs(n):
    return [(a, b) for a in range(n) for b in range(a + 1, n)]


def classify_point(frame: ShapeFrame, rank_tol: float = DEFAULT_RANK_TOL,
                   flat_tol: float = DEFAULT_FLAT_TOL) -> PointClass:
    """Classify one point; raises AmbiguousRank near rank thresholds."""
    wb = _frame_as_batch(frame)
    res = classify_batch(wb, rank_tol, flat_tol)
    if res["ambiguous"][0]:
        raise AmbiguousRank("singular value within a decade of the rank cutoff")
    rel = bool(res["rel_nullity"][0])
    return PointClass(
        stratum="RelNullity" if rel else f"U_{int(res['k'][0])}",
        k=int(res["k"][0]), nu=int(res["nu"][0]),
        rank_a=int(res["rank_a"][0]), rank_b=int(res["rank_b"][0]),
        flat=bool(res["flat"][0]), locally_wide_ok=bool(res["wide_ok"][0]),
    )


def _frame_as_batch(frame: ShapeFrame) -> WeinsteinBatch:
    one = lambda x: x[None, ...]
    return WeinsteinBatch(
        frames=None, xi=one(frame.xi), eta=one(frame.eta),
        A=one(frame.A), B=one(frame.B), psi=np.zeros(1),
        width=np.array([frame.width]), unique=np.array([frame.unique]),
        degenerate=np.array([False]), ok=np.array([True]))


def gauss_residual(chart, u) -> np.ndarray:
    """|| Rhat_intrinsic - (L^2 A + L^2 B) || / (1 + ||Rhat_intrinsic||)."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    curv = curvature_data(chart, u)
    fb = frame_batch(chart, u)
    ext = curvature_operator_from_shape(fb.alpha[..., 0], fb.alpha[..., 1],
                                        curv.pairs)
    num = np.linalg.norm(curv.rhat - ext, axis=(1, 2))
    den = 1.0 + np.linalg.norm(curv.rhat, axis=(1, 2))
    return num / den


class FrameField:
    """Gauge-fixed smooth extension of the Weinstein frame near a base point.

    The pointwise frame is defined only up to signs (and the residual slack
    of the cone); evaluations align each probe frame with the base frame
    propagated by orthogonal projection onto the probe's normal space, which
    acts as a parallel-transport surrogate over the short distances used by
    finite differences.
    """

    def __init__(self, chart, u0, angle_tol: float = DEFAULT_ANGLE_TOL,
                 require_unique: bool = True):
        self.chart = chart
        self.angle_tol = angle_tol
        self.require_unique = require_unique
        wb = weinstein_batch(frame_batch(chart, np.atleast_2d(u0)), angle_tol)
        if not wb.ok[0]:
            raise NoQuadrantFrame("no quadrant frame at the base point")
        if require_unique and not wb.unique[0]:
            raise FrameNotSmooth("frame not unique at the base point")
        self.xi0 = wb.xi[0]
        self.eta0 = wb.eta[0]

    def __call__(self, u):
        """Aligned (xi, eta, A, B, frames) at a batch of nearby points."""
        fb = frame_batch(self.chart, np.atleast_2d(u))
        wb = weinstein_batch(fb, self.angle_tol)
        if not np.all(wb.ok):
            raise NoQuadrantFrame("no quadrant frame at a probe point")
        if self.require_unique and not np.all(wb.unique):
            raise FrameNotSmooth("frame not unique in the probe neighborhood")
        # propagate the base frame: project onto each probe normal space
        NN = np.einsum("bam,bcm->bac", fb.normals, fb.normals)
        xi_ref = np.einsum("bac,c->ba", NN, self.xi0)
        eta_ref = np.einsum("bac,c->ba", NN, self.eta0)
        s1 = np.einsum("ba,ba->b", wb.xi, xi_ref)
        s2 = np.einsum("ba,ba->b", wb.eta, eta_ref)
        s3 = np.einsum("ba,ba->b", wb.xi, eta_ref)
        s4 = np.einsum("ba,ba->b", wb.eta, xi_ref)
        keep = np.abs(s1) + np.abs(s2) >= np.abs(s3) + np.abs(s4)
        sign_xi = np.where(keep, np.sign(s1), np.sign(s4))
        sign_eta = np.where(keep, np.sign(s2), np.sign(s3))
        sign_xi = np.where(sign_xi == 0, 1.0, sign_xi)
        sign_eta = np.where(sign_eta == 0, 1.0, sign_eta)
        xi = np.where(keep[:, None], wb.xi, wb.eta) * sign_xi[:, None]
        eta = np.where(keep[:, None], wb.eta, wb.xi) * sign_eta[:, None]
        A = np.where(keep[:, None, None], wb.A, wb.B) * sign_xi[:, None, None]
        B = np.where(keep[:, None, None], wb.B, wb.A) * sign_eta[:, None, None]
        return xi, eta, A, B, fb

    def shape_coord(self, u):
        """(S_xi, S_eta) as coordinate (1,1) operators plus frame data."""
        xi, eta, _, _, fb = self(u)
        h_xi = np.einsum("baij,ba->bij", fb.F2, xi)
        h_eta = np.einsum("baij,ba->bij", fb.F2, eta)
        ginv = fb.metric.ginv
        return ginv @ h_xi, ginv @ h_eta, xi, eta, fb

    def w_coord(self, u, h: float) -> np.ndarray:
        """Connection form w(d_i) = <d_i xi, eta> by central differences."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        n = u.shape[0]
        probes = [u]
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            probes.extend([u + e, u - e])
        xi_all, eta_all, _, _, _ = self(np.array(probes))
        eta0 = eta_all[0]
        w = np.empty(n)
        for i in range(n):
            dxi = (xi_all[2 * i + 1] - xi_all[2 * i + 2]) / (2.0 * h)
            w[i] = dxi @ eta0
        return w


def codazzi_residual(chart, u, h: float = 1e-4) -> float:
    """Worst Codazzi defect over coordinate pairs at ``u``.

    Checks nabla_i (S) e_j - nabla_j (S) e_i = (+/-) (w_i S' e_j - w_j S' e_i)
    for both shape operators, with the frame gauge fixed by projection
    propagation.  Requires a unique (smooth) frame near ``u``.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    n = u.shape[0]
    field = FrameField(chart, u)
    # one batched stencil: center plus axis probes
    probes = [u]
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        probes.extend([u + e, u - e])
    SA_all, SB_all, xi_all, eta_all, fb_all = field.shape_coord(np.array(probes))
    gamma = frame_batch(chart, u[None, :]).metric.gamma[0]
    g = fb_all.metric.g[0]
    w = np.array([
        (xi_all[2 * i + 1] - xi_all[2 * i + 2]) @ eta_all[0] / (2.0 * h)
        for i in range(n)])

    dSA = np.stack([(SA_all[2 * i + 1] - SA_all[2 * i + 2]) / (2.0 * h)
                    for i in range(n)])
    dSB = np.stack([(SB_all[2 * i + 1] - SB_all[2 * i + 2]) / (2.0 * h)
                    for i in range(n)])
    SA, SB = SA_all[0], SB_all[0]

    def nabla(dS, S):
        # (nabla_i S)^k_j = d_i S^k_j + Gamma^k_{ia} S^a_j - Gamma^a_{ij} S^k_a
        t2 = np.einsum("kia,aj->ikj", gamma, S)
        t3 = np.einsum("aij,ka->ikj", gamma, S)
        return dS + t2 - t3

    nA = nabla(dSA, SA)
    nB = nabla(dSB, SB)
    scale = 1.0 + np.linalg.norm(SA) + np.linalg.norm(SB)
    worst = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            rA = nA[i, :, j] - nA[j, :, i] - w[i] * SB[:, j] + w[j] * SB[:, i]
            rB = nB[i, :, j] - nB[j, :, i] + w[i] * SA[:, j] - w[j] * SA[:, i]
            worst = max(worst, np.sqrt(rA @ g @ rA), np.sqrt(rB @ g @ rB))
    return float(worst / scale)


def ricci_eq_residual(chart, u, h: float = 1e-4) -> float:
    """Worst defect of dw(X, Y) = <[A, B] X, Y> over coordinate pairs.

    The nested stencil (axis points and diagonal points) is evaluated in a
    single gauge-fixed batch; dw uses second-order mixed differences of the
    xi field paired with eta at the axis points.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    n = u.shape[0]
    field = FrameField(chart, u)

    def e(i):
        out = np.zeros(n)
        out[i] = h
        return out

    probes = [u]
    index = {"c": 0}
    for i in range(n):
        index[("a", i, +1)] = len(probes)
        probes.append(u + e(i))
        index[("a", i, -1)] = len(probes)
        probes.append(u - e(i))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            for s in (+1, -1):
                index[("d", i, s, j, +1)] = len(probes)
                probes.append(u + s * e(i) + e(j))
                index[("d", i, s, j, -1)] = len(probes)
                probes.append(u + s * e(i) - e(j))
    xi_all, eta_all, A_all, B_all, _ = field(np.array(probes))
    fb0 = frame_batch(chart, u[None, :])
    Lchol = np.linalg.cholesky(fb0.metric.g[0])

    def w_at(i, s, j):
        """w_j at the axis point u + s h e_i."""
        xp = xi_all[index[("d", i, s, j, +1)]]
        xm = xi_all[index[("d", i, s, j, -1)]]
        return (xp - xm) @ eta_all[index[("a", i, s)]] / (2.0 * h)

    comm = A_all[0] @ B_all[0] - B_all[0] @ A_all[0]
    scale = 1.0 + np.linalg.norm(A_all[0]) * np.linalg.norm(B_all[0])
    worst = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            dwj_di = (w_at(i, +1, j) - w_at(i, -1, j)) / (2.0 * h)
            dwi_dj = (w_at(j, +1, i) - w_at(j, -1, i)) / (2.0 * h)
            dw = dwj_di - dwi_dj
            rhs = Lchol[i, :] @ comm @ Lchol[j, :]
            worst = max(worst, abs(dw - rhs))
    return float(worst / scale)
