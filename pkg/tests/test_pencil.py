"""Determinant-pencil inequality and its equality classification.

Ground truths: hand-computed determinants for diagonal pairs, the parity
identity for A = 0, and a seeded random sweep against the t-grid margin.
"""
import numpy as np
import pytest

from codim2lab import pencil
from codim2lab.errors import AmbiguousRank, CNotPositive
from codim2lab.pencil import PsdPair


def test_pencil_det_diagonal():
    pair = PsdPair(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))
    assert pencil.pencil_det(pair, 2.0) == pytest.approx(2.0)


def test_pencil_det_identity():
    pair = PsdPair(np.eye(2), np.zeros((2, 2)))
    assert pencil.pencil_det(pair, 5.0) == pytest.approx(1.0)


def test_pencil_det_direct_evaluation():
    pair = PsdPair(np.diag([2.0, 1.0]), np.diag([1.0, 1.0]))
    # (2+1)(1+1) = 6 at t = 1
    assert pencil.pencil_det(pair, 1.0) == pytest.approx(6.0)


def test_pencil_det_matches_numpy_on_random_symmetric():
    rng = np.random.default_rng(0)
    for _ in range(50):
        d = int(rng.integers(2, 7))
        pair = pencil.random_psd_pair(rng, d)
        t = float(rng.uniform(-3, 3))
        M = pair.A + t * pair.B
        assert pencil.pencil_det(pair, t) == pytest.approx(
            np.linalg.det(M), rel=1e-9, abs=1e-12)


def test_inequality_basic_cases():
    assert pencil.inequality_holds(
        PsdPair(np.diag([2.0, 1.0]), np.diag([1.0, 1.0])), [1.0, 2.0])
    assert pencil.inequality_holds(
        PsdPair(np.diag([1.0, 0.0]), np.diag([0.0, 1.0])), [0.5, 1.0, 7.0])
    # A = 0 gives equality by parity
    assert pencil.inequality_holds(
        PsdPair(np.zeros((2, 2)), np.eye(2)), [3.0])


def test_parity_exact_when_A_zero():
    rng = np.random.default_rng(1)
    B = pencil.random_psd_pair(rng, 4).A
    pair = PsdPair(np.zeros((4, 4)), B)
    for t in (0.5, 1.0, 2.0):
        assert abs(pencil.pencil_det(pair, t)) == pytest.approx(
            abs(pencil.pencil_det(pair, -t)))


def test_classify_kernels_intersect():
    v = pencil.classify_equality(PsdPair(np.diag([1.0, 0.0]), np.diag([1.0, 0.0])))
    assert v.branch == "KernelsIntersect"
    w = v.witness
    assert np.linalg.norm(np.diag([1.0, 0.0]) @ w) < 1e-10


def test_classify_kernels_complement():
    v = pencil.classify_equality(PsdPair(np.diag([1.0, 0.0]), np.diag([0.0, 1.0])))
    assert v.branch == "KernelsComplement"


def test_classify_strict():
    # |det(A+2B)| = 3 > 1 = |det(A-2B)|
    v = pencil.classify_equality(PsdPair(np.diag([1.0, 1.0]), np.diag([1.0, 0.0])))
    assert v.branch == "Strict"


def test_classify_guard_raises_near_threshold():
    A = np.diag([1.0, 2e-7])
    B = np.diag([0.0, 1.0])
    with pytest.raises(AmbiguousRank):
        pencil.classify_equality(PsdPair(A, B), rank_tol=1e-7)


def test_schur_reduce_block_diagonal():
    C, Ahat, Bhat = pencil.schur_reduce(PsdPair(np.diag([1.0, 2.0]),
                                                np.diag([0.0, 1.0])))
    assert C == pytest.approx(np.array([[1.0]]))
    assert Ahat == pytest.approx(np.array([[2.0]]))
    assert Bhat == pytest.approx(np.array([[1.0]]))


def test_schur_reduce_coupling():
    # Ahat = 2 - 1 * 1^{-1} * 1 = 1
    pair = PsdPair(np.array([[1.0, 1.0], [1.0, 2.0]]), np.diag([0.0, 1.0]))
    C, Ahat, Bhat = pencil.schur_reduce(pair)
    assert Ahat == pytest.approx(np.array([[1.0]]))


def test_schur_reduce_rejects_shared_kernel():
    with pytest.raises(CNotPositive):
        pencil.schur_reduce(PsdPair(np.diag([0.0, 1.0]), np.diag([0.0, 1.0])))


def test_schur_identity_random():
    rng = np.random.default_rng(3)
    done = 0
    while done < 25:
        d = int(rng.integers(2, 7))
        rb = int(rng.integers(1, d))
        pair = pencil.random_psd_pair(rng, d, rank_b=rb)
        try:
            C, Ahat, Bhat = pencil.schur_reduce(pair)
        except (CNotPositive, ValueError):
            continue
        detC = np.linalg.det(C)
        for t in np.logspace(-2, 2, 7):
            lhs = pencil.pencil_det(pair, t)
            rhs = detC * np.linalg.det(Ahat + t * Bhat)
            scale = max(abs(lhs), abs(rhs), 1e-30)
            assert abs(lhs - rhs) / scale < 1e-8
        # Schur complement stays PSD
        if Ahat.size:
            lam = np.linalg.eigvalsh(Ahat)[0]
            assert lam >= -1e-10 * max(np.linalg.norm(Ahat, 2), 1e-300)
        done += 1


def test_random_sweep_inequality_and_agreement():
    res = pencil.fuzz(trials=400, dim_max=6, seed=11)
    assert res["failures"] == 0
    assert res["mismatches"] == 0
    assert res["worst_margin"] > -1e-9


def test_classifier_consistency_on_grid():
    """Strict verdict must track the normalized grid margin."""
    rng = np.random.default_rng(5)
    checked = 0
    while checked < 60:
        d = int(rng.integers(2, 5))
        pair = pencil.random_psd_pair(rng, d, rank_a=int(rng.integers(0, d + 1)),
                                      rank_b=int(rng.integers(0, d + 1)))
        try:
            verdict = pencil.classify_equality(pair)
        except AmbiguousRank:
            continue
        strict_truth = pencil.grid_margin(pair) > pencil.STRICT_MARGIN
        assert (verdict.branch == "Strict") == strict_truth
        checked += 1
