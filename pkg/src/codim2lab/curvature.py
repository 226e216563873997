"""Intrinsic Riemannian quantities from chart jets.

Everything is assembled from exact third-order jets of the chart map: the
induced metric and its first two derivative tensors, Christoffel symbols,
the Riemann tensor, the curvature operator on an orthonormal 2-form basis,
sectional-curvature extrema over 2-planes and the Ricci spectrum.

Sign convention: ``R(X, Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z -
nabla_[X,Y] Z`` and sectional curvature ``K(X, Y) = <R(X, Y)Y, X>`` for
orthonormal X, Y, so the round unit sphere has K = +1.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.optimize import minimize

from .errors import DegenerateMetric
from .quadrature import quasi_sphere_directions

DEFAULT_DET_FLOOR = 1e-12


@dataclass
class MetricData:
    """First fundamental form with one derivative level and Christoffels.

    Batched: ``g`` is (B, n, n); ``dg[b, k, i, j]`` = d_k g_ij;
    ``gamma[b, m, i, j]`` = Gamma^m_ij; ``frame`` maps coordinates to a
    g-orthonormal frame (columns), so frame^T g frame = Id.
    """

    g: np.ndarray
    dg: np.ndarray
    gamma: np.ndarray
    ginv: np.ndarray
    frame: np.ndarray


@dataclass
class CurvatureData:
    """Riemann tensor and curvature operator at a batch of points.

    ``riem[b, m, i, k, l]`` are coordinate components of R(d_k, d_l) d_i =
    riem^m d_m; ``lowered`` the fully covariant tensor; ``riem_on`` the same
    in the orthonormal frame; ``rhat`` the curvature operator on the
    orthonormal basis {e_a ^ e_b : a < b}; ``pairs`` that index list.
    """

    riem: np.ndarray
    lowered: np.ndarray
    riem_on: np.ndarray
    rhat: np.ndarray
    pairs: list
    metric: MetricData


def jet_arrays(chart, u, order: int = 3):
    """Stack chart jets into coefficient arrays (F1, F2, F3)."""
    out = chart.jets(u, order)
    F1 = np.stack([j.d1 for j in out], axis=1)
    F2 = np.stack([j.d2 for j in out], axis=1) if order >= 2 else None
    F3 = np.stack([j.d3 for j in out], axis=1) if order >= 3 else None
    return F1, F2, F3


def metric_data(F1, F2, det_floor: float = DEFAULT_DET_FLOOR) -> MetricData:
    g = np.einsum("bai,baj->bij", F1, F1)
    det = np.linalg.det(g)
    if np.any(det <= det_floor):
        raise DegenerateMetric(f"det g fell below {det_floor}")
    ginv = np.linalg.inv(g)
    # dg[b,k,i,j] = d_k g_ij
    x = np.einsum("baik,baj->bkij", F2, F1)
    dg = x + x.transpose(0, 1, 3, 2)
    # bracket[b,k,i,j] = d_i g_jk + d_j g_ik - d_k g_ij
    bracket = np.einsum("bijk->bkij", dg) + np.einsum("bjik->bkij", dg) - dg
    gamma = 0.5 * np.einsum("bmk,bkij->bmij", ginv, bracket)
    # orthonormal frame from the Cholesky factor: columns of L^{-T}
    L = np.linalg.cholesky(g)
    frame = np.linalg.inv(L).transpose(0, 2, 1)
    return MetricData(g=g, dg=dg, gamma=gamma, ginv=ginv, frame=frame)


def _dgamma(md: MetricData, F1, F2, F3):
    """dGamma[b, l, m, i, j] = d_l Gamma^m_ij."""
    # d2g[b,k,l,i,j] = d_k d_l g_ij
    x = np.einsum("baikl,baj->bklij", F3, F1)
    y = np.einsum("baik,bajl->bklij", F2, F2)
    d2g = x + x.transpose(0, 1, 2, 4, 3) + y + y.transpose(0, 2, 1, 3, 4)
    dginv = -np.einsum("bma,blac,bck->blmk", md.ginv, md.dg, md.ginv)
    dg = md.dg
    # bracket[b,k,i,j] = d_i g_jk + d_j g_ik - d_k g_ij, and its l-derivative
    bracket = np.einsum("bijk->bkij", dg) + np.einsum("bjik->bkij", dg) - dg
    dbracket = (
        np.einsum("blijk->blkij", d2g)
        + np.einsum("bljik->blkij", d2g)
        - d2g
    )
    return 0.5 * (
        np.einsum("blmk,bkij->blmij", dginv, bracket)
        + np.einsum("bmk,blkij->blmij", md.ginv, dbracket)
    )


def curvature_data(chart, u, det_floor: float = DEFAULT_DET_FLOOR) -> CurvatureData:
    """Riemann tensor and curvature operator from order-3 jets."""
    F1, F2, F3 = jet_arrays(chart, u, order=3)
    md = metric_data(F1, F2, det_floor)
    dG = _dgamma(md, F1, F2, F3)
    G = md.gamma
    # R^m_{i k l} = d_k Gamma^m_{l i} - d_l Gamma^m_{k i}
    #              + Gamma^m_{k a} Gamma^a_{l i} - Gamma^m_{l a} Gamma^a_{k i}
    term1 = np.einsum("bkmli->bmikl", dG)
    term2 = np.einsum("blmki->bmikl", dG)
    term3 = np.einsum("bmka,bali->bmikl", G, G)
    term4 = np.einsum("bmla,baki->bmikl", G, G)
    riem = term1 - term2 + term3 - term4
    lowered = np.einsum("bmj,bjikl->bmikl", md.g, riem)
    E = md.frame
    riem_on = np.einsum("bmikl,bma,bic,bkp,blq->bacpq", lowered, E, E, E, E)
    pairs = list(combinations(range(md.g.shape[1]), 2))
    N = len(pairs)
    B = md.g.shape[0]
    rhat = np.empty((B, N, N))
    for p, (a, b) in enumerate(pairs):
        for q, (c, d) in enumerate(pairs):
            rhat[:, p, q] = riem_on[:, a, b, c, d]
    return CurvatureData(
        riem=riem, lowered=lowered, riem_on=riem_on, rhat=rhat, pairs=pairs, metric=md
    )


def sectional(curv: CurvatureData, idx: int, X: np.ndarray, Y: np.ndarray) -> float:
    """Sectional curvature of span(X, Y) in orthonormal-frame components."""
    R = curv.riem_on[idx]
    num = np.einsum("acpq,a,c,p,q->", R, X, Y, X, Y)
    gram = (X @ X) * (Y @ Y) - (X @ Y) ** 2
    return float(num / gram)


def sectional_range(curv: CurvatureData, idx: int = 0, seeds: int = 256,
                    refine: int = 6) -> tuple:
    """(min, max) of K over 2-planes plus the min eigenvalue of Rhat.

    Quasirandom plane seeds followed by local refinement; the smallest
    eigenvalue of the curvature operator is returned alongside as a certified
    one-sided bound (plane minimum >= operator minimum).
    """
    n = curv.metric.g.shape[1]
    R = curv.riem_on[idx]

    dirs = quasi_sphere_directions(2 * seeds, 2 * n)
    X, Y = dirs[:, :n].copy(), dirs[:, n:].copy()
    gram = np.einsum("bi,bi->b", X, X) * np.einsum("bi,bi->b", Y, Y) - (
        np.einsum("bi,bi->b", X, Y) ** 2
    )
    ok = gram > 1e-6
    X, Y, gram = X[ok], Y[ok], gram[ok]
    K = np.einsum("acpq,ba,bc,bp,bq->b", R, X, Y, X, Y) / gram

    def k_of(z):
        Xz, Yz = z[:n], z[n:]
        gr = (Xz @ Xz) * (Yz @ Yz) - (Xz @ Yz) ** 2
        if gr < 1e-9:
            return 0.0
        return np.einsum("acpq,a,c,p,q->", R, Xz, Yz, Xz, Yz) / gr

    results = []
    for sign in (1.0, -1.0):
        order = np.argsort(sign * K)
        best = sign * K[order[0]]
        for i in order[:refine]:
            z0 = np.concatenate([X[i], Y[i]])
            res = minimize(lambda z: sign * k_of(z), z0, method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 400})
            best = min(best, res.fun)
        results.append(sign * best)
    kmin, kmax = results[0], -(-results[1])
    lam_min = float(np.linalg.eigvalsh(curv.rhat[idx])[0])
    return float(kmin), float(kmax), lam_min


def ricci_on(curv: CurvatureData) -> np.ndarray:
    """Ricci tensor in the orthonormal frame, shape (B, n, n)."""
    return np.einsum("bcicj->bij", curv.riem_on)


def ricci_profile(curv: CurvatureData, tol: float = 1e-10):
    """Sorted Ricci eigenvalues plus the 2-positivity flag per point."""
    eigs = np.linalg.eigvalsh(ricci_on(curv))
    two_positive = (eigs[:, 0] + eigs[:, 1]) > tol
    return eigs, two_positive


def bianchi_residual(curv: CurvatureData) -> float:
    """Max residual of the first Bianchi identity, normalized."""
    L = curv.lowered
    cyc = L + np.einsum("bmikl->bmkli", L) + np.einsum("bmikl->bmlik", L)
    scale = 1.0 + np.max(np.abs(L))
    return float(np.max(np.abs(cyc)) / scale)


def symmetry_residual(curv: CurvatureData) -> float:
    """Max violation of the algebraic symmetries of the lowered tensor."""
    L = curv.lowered
    scale = 1.0 + np.max(np.abs(L))
    r1 = np.max(np.abs(L + np.einsum("bmikl->bimkl", L)))   # antisym first pair
    r2 = np.max(np.abs(L + np.einsum("bmikl->bmilk", L)))   # antisym last pair
    r3 = np.max(np.abs(L - np.einsum("bmikl->bklmi", L)))   # pair exchange
    return float(max(r1, r2, r3) / scale)
