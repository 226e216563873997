"""Intrinsic curvature assembly against closed-form geometries."""
import numpy as np
import pytest

from codim2lab import curvature as cv
from codim2lab.charts import Chart, map_from_components
from codim2lab.errors import DegenerateMetric
from codim2lab.jets import jcos, jsin


def sphere_chart(R=1.0, extra_zero=True):
    def comps(v):
        th, ph = v
        out = [jsin(th) * jcos(ph) * R, jsin(th) * jsin(ph) * R, jcos(th) * R]
        if extra_zero:
            out.append(th * 0.0)
        return out
    dim = 4 if extra_zero else 3
    return Chart("s2", 2, dim, ((0.2, 2.9), (0.0, 6.28)),
                 map_from_components(comps))


def s3_chart(R=1.0):
    def comps(v):
        a, b, c = v
        return [R * jsin(a) * jsin(b) * jcos(c), R * jsin(a) * jsin(b) * jsin(c),
                R * jsin(a) * jcos(b), R * jcos(a), a * 0.0]
    return Chart("s3", 3, 5, ((0.3, 2.8), (0.3, 2.8), (0.0, 6.28)),
                 map_from_components(comps))


def product_chart():
    def comps(v):
        th, ph, ps = v
        return [jsin(th) * jcos(ph), jsin(th) * jsin(ph), jcos(th),
                jcos(ps), jsin(ps)]
    return Chart("s2xs1", 3, 5, ((0.3, 2.8), (0.0, 6.28), (0.0, 6.28)),
                 map_from_components(comps))


def flat_chart():
    def comps(v):
        x, y, z = v
        return [x + 0.5 * y, y, z - 0.25 * x, 2.0 * x, x * 0.0]
    return Chart("flat", 3, 5, ((0.0, 1.0),) * 3, map_from_components(comps))


U2 = np.array([[1.1, 0.7], [0.5, 2.5], [2.0, 4.0]])
U3 = np.array([[1.0, 0.9, 0.5], [1.4, 2.0, 3.0]])


def test_flat_chart_curvature_vanishes():
    curv = cv.curvature_data(flat_chart(), U3[:1])
    assert np.abs(curv.lowered).max() == 0.0


def test_round_sphere_constant_curvature():
    for R in (1.0, 2.0):
        curv = cv.curvature_data(sphere_chart(R), U2)
        np.testing.assert_allclose(curv.rhat[:, 0, 0], 1.0 / R**2, atol=1e-9)


def test_round_s3_sectional_range():
    curv = cv.curvature_data(s3_chart(1.0), U3)
    kmin, kmax, lam = cv.sectional_range(curv, 0)
    assert kmin == pytest.approx(1.0, abs=1e-8)
    assert kmax == pytest.approx(1.0, abs=1e-8)
    assert lam == pytest.approx(1.0, abs=1e-9)


def test_product_sectional_range_and_flat_planes():
    curv = cv.curvature_data(product_chart(), U3)
    kmin, kmax, lam = cv.sectional_range(curv, 0)
    assert kmin == pytest.approx(0.0, abs=1e-6)
    assert kmax == pytest.approx(1.0, abs=1e-6)
    assert lam == pytest.approx(0.0, abs=1e-10)


def test_ricci_profiles():
    curv = cv.curvature_data(s3_chart(1.0), U3)
    eigs, two_pos = cv.ricci_profile(curv)
    np.testing.assert_allclose(eigs, 2.0, atol=1e-9)
    assert two_pos.all()

    curv = cv.curvature_data(product_chart(), U3)
    eigs, two_pos = cv.ricci_profile(curv)
    np.testing.assert_allclose(np.sort(eigs, axis=1), [[0, 1, 1]] * 2, atol=1e-9)
    assert two_pos.all()

    curv = cv.curvature_data(flat_chart(), U3[:1])
    eigs, two_pos = cv.ricci_profile(curv)
    np.testing.assert_allclose(eigs, 0.0, atol=1e-12)
    assert not two_pos.any()


def test_symmetries_and_bianchi():
    for chart, pts in ((s3_chart(1.3), U3), (product_chart(), U3)):
        curv = cv.curvature_data(chart, pts)
        assert cv.symmetry_residual(curv) < 1e-10
        assert cv.bianchi_residual(curv) < 1e-9


def test_metric_derivatives_match_finite_differences():
    chart = product_chart()
    u0 = np.array([1.0, 0.9, 0.5])
    F1, F2, F3 = cv.jet_arrays(chart, u0[None, :])
    md = cv.metric_data(F1, F2)
    h = 1e-5

    def g_at(u):
        F1h, F2h, _ = cv.jet_arrays(chart, u[None, :], order=2)
        return cv.metric_data(F1h, F2h).g[0]

    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        fd = (g_at(u0 + e) - g_at(u0 - e)) / (2 * h)
        np.testing.assert_allclose(md.dg[0, k], fd, atol=1e-6)


def test_degenerate_metric_raises():
    def comps(v):
        x, y = v
        return [x, x * 1.0, y * 0.0, y * 0.0]
    bad = Chart("degen", 2, 4, ((0, 1), (0, 1)), map_from_components(comps))
    with pytest.raises(DegenerateMetric):
        cv.curvature_data(bad, np.array([[0.5, 0.5]]))


def test_orthonormal_frame_property():
    curv = cv.curvature_data(product_chart(), U3)
    md = curv.metric
    gram = np.einsum("bia,bij,bjc->bac", md.frame, md.g, md.frame)
    np.testing.assert_allclose(gram, np.tile(np.eye(3), (len(U3), 1, 1)),
                               atol=1e-12)
