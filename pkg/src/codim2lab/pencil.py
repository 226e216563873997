"""Determinant inequality and equality classification for PSD pencils.

For a pair of positive semidefinite self-adjoint operators A, B the pencil
satisfies ``|det(A + tB)| >= |det(A - tB)|`` for every t > 0, with equality
for all t exactly when the kernels share a vector or complement each other.
This module provides a numerically careful implementation of that inequality,
its equality-case decision procedure, and the Schur reduction that underlies
it, plus a fuzzing driver used by the CLI.

The equality classification is discontinuous in the matrix entries, so every
rank decision is guarded: singular values within a decade of the cutoff raise
:class:`~codim2lab.errors.AmbiguousRank` instead of committing to a branch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import ldl

from .errors import AmbiguousRank, CNotPositive

DEFAULT_RANK_TOL = 1e-7
#: reference t-grid used to cross-check equality verdicts
T_GRID = np.logspace(-3.0, 3.0, 20)
#: margin (relative to the scale (|A| + t|B|)^dim) that separates
#: "equality within noise" from a strict inequality
STRICT_MARGIN = 1e-6


@dataclass(frozen=True)
class PsdPair:
    """A pair of symmetric PSD matrices of equal size."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("A and B must be square matrices of equal size")
        for name, M in (("A", A), ("B", B)):
            scale = np.linalg.norm(M)
            if scale > 0 and np.linalg.norm(M - M.T) > 1e-12 * scale:
                raise ValueError(f"{name} is not symmetric within tolerance")
            if scale > 0:
                lam = np.linalg.eigvalsh(M)[0]
                if lam < -1e-10 * np.linalg.norm(M, 2):
                    raise ValueError(f"{name} is not PSD within tolerance")

    @property
    def dim(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class PencilVerdict:
    """Outcome of the equality classification.

    ``branch`` is one of ``"KernelsIntersect"``, ``"KernelsComplement"`` or
    ``"Strict"``; ``witness`` holds a shared kernel vector, a pair of kernel
    bases, or None.
    """

    branch: str
    witness: object = None
    margin: float = field(default=float("nan"))


def _sym_det(M: np.ndarray) -> float:
    """Determinant via symmetric-indefinite (Bunch-Kaufman) factorization."""
    n = M.shape[0]
    if n == 0:
        return 1.0
    if n == 1:
        return float(M[0, 0])
    if n == 2:
        return float(M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0])
    _, d, _ = ldl(M)
    det = 1.0
    i = 0
    while i < n:
        if i + 1 < n and d[i + 1, i] != 0.0:
            det *= d[i, i] * d[i + 1, i + 1] - d[i + 1, i] * d[i, i + 1]
            i += 2
        else:
            det *= d[i, i]
            i += 1
    return float(det)


def pencil_det(pair: PsdPair, t: float) -> float:
    """det(A + tB) through a sign-stable symmetric factorization."""
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    return _sym_det(pair.A + t * pair.B)


def _scale(pair: PsdPair, t: float) -> float:
    base = np.linalg.norm(pair.A, 2) + abs(t) * np.linalg.norm(pair.B, 2)
    return max(base ** pair.dim, 1e-300)


def inequality_holds(pair: PsdPair, t_samples, tol: float = 1e-9) -> bool:
    """True iff |det(A+tB)| >= |det(A-tB)| - tol*scale at every sampled t > 0."""
    for t in np.atleast_1d(t_samples):
        if t <= 0:
            raise ValueError("t samples must be positive")
        plus = abs(pencil_det(pair, t))
        minus = abs(pencil_det(pair, -t))
        if plus < minus - tol * _scale(pair, t):
            return False
    return True


def grid_margin(pair: PsdPair, t_grid=T_GRID) -> float:
    """max over the grid of (|det(A+tB)| - |det(A-tB)|) / scale."""
    worst = 0.0
    for t in t_grid:
        gap = abs(pencil_det(pair, t)) - abs(pencil_det(pair, -t))
        worst = max(worst, gap / _scale(pair, t))
    return worst


def _kernel_split(M: np.ndarray, rank_tol: float, guard: bool = True):
    """Orthonormal bases (kernel, complement) of a symmetric matrix.

    Raises AmbiguousRank when some singular value falls within a factor 10
    of the cutoff rank_tol * sigma_max.
    """
    U, s, _ = np.linalg.svd(M)
    smax = s[0] if len(s) else 0.0
    if smax == 0.0:
        return U, U[:, :0]
    cut = rank_tol * smax
    if guard and np.any((s > cut / 10.0) & (s < cut * 10.0)):
        raise AmbiguousRank(f"singular value near rank cutoff {cut:.3e}")
    small = s < cut
    return U[:, small], U[:, ~small]


def classify_equality(pair: PsdPair, rank_tol: float = DEFAULT_RANK_TOL) -> PencilVerdict:
    """Decide the equality case of the pencil inequality.

    Branches: kernels intersect, kernels complement (both mean equality for
    every t), or strict.  The kernel-based verdict is cross-checked against
    the numeric margin on the reference t-grid; a disagreement is reported
    as AmbiguousRank since it means the data sit too close to a branch
    boundary for the tolerance in use.
    """
    n = pair.dim
    kerA, _ = _kernel_split(pair.A, rank_tol)
    kerB, _ = _kernel_split(pair.B, rank_tol)
    margin = grid_margin(pair)

    branch = "Strict"
    witness = None
    if kerA.shape[1] and kerB.shape[1]:
        # principal angle between the kernels decides the intersection
        sv = np.linalg.svd(kerA.T @ kerB, compute_uv=False)
        if sv.size and sv[0] > 1.0 - 1e-10:
            branch = "KernelsIntersect"
            # a shared kernel vector: smallest singular vector of [A; B]
            _, _, Vt = np.linalg.svd(np.vstack([pair.A, pair.B]))
            witness = Vt[-1]
    if branch == "Strict" and kerA.shape[1] + kerB.shape[1] == n:
        normA = np.linalg.norm(pair.A, 2)
        normB = np.linalg.norm(pair.B, 2)
        if normA > 0 and normB > 0:
            branch = "KernelsComplement"
            witness = (kerA, kerB)
    if branch == "Strict" and kerA.shape[1] == n:
        # A = 0: det(A+tB) is odd/even in t, equality by parity
        branch = "KernelsIntersect" if kerB.shape[1] else "KernelsComplement"
        witness = kerA[:, 0] if kerB.shape[1] else (kerA, kerB)

    equality_branch = branch in ("KernelsIntersect", "KernelsComplement")
    if equality_branch and margin > STRICT_MARGIN:
        raise AmbiguousRank(
            f"kernel verdict {branch} contradicts grid margin {margin:.3e}"
        )
    if not equality_branch and margin <= STRICT_MARGIN:
        raise AmbiguousRank(
            f"strict verdict contradicts grid margin {margin:.3e}"
        )
    return PencilVerdict(branch, witness, margin)


def schur_reduce(pair: PsdPair, rank_tol: float = DEFAULT_RANK_TOL):
    """Block reduction det(A + tB) = det(C) det(Ahat + t Bhat).

    Splits along K = ker B: C is A restricted to K, Bhat is B on the
    complement, and Ahat = E - D^T C^{-1} D is the Schur complement of C.
    Requires B singular; raises CNotPositive when C has a (near-)kernel,
    which is exactly the kernels-intersect branch.
    """
    K, Kp = _kernel_split(pair.B, rank_tol, guard=False)
    if K.shape[1] == 0:
        raise ValueError("schur_reduce requires a singular B")
    C = K.T @ pair.A @ K
    D = K.T @ pair.A @ Kp
    E = Kp.T @ pair.A @ Kp
    Bhat = Kp.T @ pair.B @ Kp
    scaleA = max(np.linalg.norm(pair.A, 2), 1e-300)
    if C.size and np.linalg.eigvalsh(C)[0] <= rank_tol * scaleA:
        raise CNotPositive("A restricted to ker B is not positive definite")
    Ahat = E - D.T @ np.linalg.solve(C, D) if C.size else E
    return C, Ahat, Bhat


def random_psd_pair(rng: np.random.Generator, dim: int,
                    rank_a: int | None = None, rank_b: int | None = None) -> PsdPair:
    """Random PSD pair G^T G with optional rank deficiency by zeroing columns."""
    def one(rank):
        G = rng.standard_normal((dim, dim))
        if rank is not None and rank < dim:
            G[:, rank:] = 0.0
        return G @ G.T
    return PsdPair(one(rank_a), one(rank_b))


def fuzz(trials: int, dim_max: int = 6, seed: int = 0, tol: float = 1e-9) -> dict:
    """Random-pair property sweep for the pencil inequality and classifier.

    Returns counts of failures (inequality violated), classifier/grid
    disagreements surfaced as ambiguous, and the worst inequality margin.
    """
    rng = np.random.default_rng(seed)
    failures = 0
    ambiguous = 0
    mismatches = 0
    worst = np.inf
    for _ in range(trials):
        dim = int(rng.integers(2, dim_max + 1))
        ra = int(rng.integers(0, dim + 1))
        rb = int(rng.integers(0, dim + 1))
        pair = random_psd_pair(rng, dim, ra, rb)
        if not inequality_holds(pair, T_GRID, tol):
            failures += 1
        gap = min(
            (abs(pencil_det(pair, t)) - abs(pencil_det(pair, -t))) / _scale(pair, t)
            for t in T_GRID
        )
        worst = min(worst, gap)
        try:
            verdict = classify_equality(pair)
        except AmbiguousRank:
            ambiguous += 1
            continue
        strict_truth = grid_margin(pair) > STRICT_MARGIN
        if (verdict.branch == "Strict") != strict_truth:
            mismatches += 1
    return {
        "trials": trials,
        "failures": failures,
        "ambiguous": ambiguous,
        "mismatches": mismatches,
        "worst_margin": float(worst),
    }
