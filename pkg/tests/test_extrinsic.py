"""Fundamental forms, Weinstein frames, strata and equation residuals."""
import numpy as np
import pytest

from codim2lab import extrinsic as ex
from codim2lab import gallery
from codim2lab.charts import Chart, map_from_components
from codim2lab.errors import AmbiguousRank, FrameNotSmooth, NoQuadrantFrame
from codim2lab.jets import jcos, jsin


@pytest.fixture(scope="module")
def round_s3():
    return gallery.round_sphere(3, 1.0)


@pytest.fixture(scope="module")
def product():
    return gallery.product_spheres(2, 2)


@pytest.fixture(scope="module")
def switched():
    return gallery.switched_sphere(eps=0.2)


def affine_chart():
    def comps(v):
        x, y, z = v
        return [x, y + 0.2 * x, z, x - y, x * 0.0]
    return Chart("affine", 3, 5, ((0.0, 1.0),) * 3, map_from_components(comps))


def test_affine_alpha_vanishes():
    md, alpha = ex.fundamental_forms(affine_chart(), np.array([[0.5, 0.5, 0.5]]))
    assert np.abs(alpha).max() == 0.0


def test_sphere_second_form_closed_form(round_s3):
    # alpha(X, X) = |X|^2 / R nu with a single normal direction active
    chart = round_s3.charts[0]
    fb = ex.frame_batch(chart, np.array([[0.2, -0.3, 0.5]]))
    a0, a1 = fb.alpha[0, :, :, 0], fb.alpha[0, :, :, 1]
    norms = np.linalg.norm(a0), np.linalg.norm(a1)
    big, small = max(norms), min(norms)
    assert small < 1e-12
    # the active component is +- identity (unit sphere)
    active = a0 if norms[0] > norms[1] else a1
    sign = np.sign(np.trace(active))
    np.testing.assert_allclose(sign * active, np.eye(3), atol=1e-10)


def test_product_block_second_form(product):
    chart = product.charts[0]
    fb = ex.frame_batch(chart, np.array([[0.3, 0.1, -0.4, 0.2]]))
    wb = ex.weinstein_batch(fb)
    np.testing.assert_allclose(sorted(np.linalg.eigvalsh(wb.A[0])),
                               [0, 0, 1, 1], atol=1e-9)
    np.testing.assert_allclose(sorted(np.linalg.eigvalsh(wb.B[0])),
                               [0, 0, 1, 1], atol=1e-9)
    assert wb.unique[0] and wb.ok[0]
    assert wb.width[0] == pytest.approx(np.pi / 2, abs=1e-9)


def test_round_sphere_ray_cone(round_s3):
    frame = ex.weinstein_frame(round_s3.charts[0], np.array([0.4, 0.1, -0.2]))
    assert frame.width == pytest.approx(0.0, abs=1e-9)
    assert not frame.unique
    # 45-degree frame splits the single curvature direction evenly
    np.testing.assert_allclose(np.linalg.eigvalsh(frame.A),
                               np.linalg.eigvalsh(frame.B), atol=1e-10)


def test_flat_point_arbitrary_frame():
    frame = ex.weinstein_frame(affine_chart(), np.array([0.5, 0.5, 0.5]))
    assert not frame.unique
    assert np.abs(frame.A).max() == 0.0 and np.abs(frame.B).max() == 0.0


def test_shape_operator_rotation(product):
    frame = ex.weinstein_frame(product.charts[0],
                               np.array([0.3, 0.1, -0.4, 0.2]))
    Ab = ex.shape_operator(frame, 3 * np.pi / 4)
    s = np.sqrt(0.5)
    np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(Ab)),
                               [-s, -s, s, s], atol=1e-9)
    np.testing.assert_allclose(ex.shape_operator(frame, 0.0), frame.A,
                               atol=1e-12)
    np.testing.assert_allclose(ex.shape_operator(frame, np.pi), -frame.A,
                               atol=1e-12)


def test_classification_round_product_switched(round_s3, product, switched):
    pc = ex.classify_point(ex.weinstein_frame(round_s3.charts[0],
                                              np.array([0.4, 0.0, 0.3])))
    assert pc.stratum == "U_0" and (pc.rank_a, pc.rank_b) == (3, 0)
    assert not pc.locally_wide_ok

    pc = ex.classify_point(ex.weinstein_frame(product.charts[0],
                                              np.array([0.3, 0.1, -0.4, 0.2])))
    assert pc.stratum == "U_2" and pc.locally_wide_ok and pc.nu == 0

    band = switched.charts[0]
    pc = ex.classify_point(ex.weinstein_frame(band, np.array([0.9, 1.0, 2.0])))
    assert pc.stratum == "U_1" and (pc.rank_a, pc.rank_b) == (2, 1)

    # flat collar point: common kernel along the cylinder axis
    pc = ex.classify_point(ex.weinstein_frame(band, np.array([0.0, 1.0, 2.0])))
    assert pc.stratum == "RelNullity" and pc.nu == 1 and pc.flat


def test_classification_exhaustive_partition(switched):
    rng = np.random.default_rng(0)
    band = switched.charts[0]
    pts = band.sample(400, rng)
    wb = ex.weinstein_batch(ex.frame_batch(band, pts))
    res = ex.classify_batch(wb)
    amb = res["ambiguous"]
    rel = res["rel_nullity"][~amb]
    k = res["k"][~amb]
    # every unambiguous point gets exactly one stratum
    assert np.all(rel | (k >= 0))
    assert np.all(res["nu"][~amb][rel] >= 1)


def test_gauss_residual_examples(round_s3, switched):
    assert ex.gauss_residual(affine_chart(),
                             np.array([[0.5, 0.5, 0.5]]))[0] == 0.0
    r = ex.gauss_residual(round_s3.charts[0],
                          np.array([[0.2, 0.3, -0.1], [0.5, -0.4, 0.2]]))
    assert r.max() < 1e-7
    rng = np.random.default_rng(1)
    pts = switched.charts[0].sample(64, rng)
    assert ex.gauss_residual(switched.charts[0], pts).max() < 1e-6


def test_codazzi_and_ricci_residuals(product, switched):
    u = np.array([0.45, 0.3, -0.2, 0.5])
    assert ex.codazzi_residual(product.charts[0], u) < 1e-5
    assert ex.ricci_eq_residual(product.charts[0], u) < 1e-5
    u = np.array([0.8, 1.0, 2.0])
    assert ex.codazzi_residual(switched.charts[0], u) < 1e-5
    assert ex.ricci_eq_residual(switched.charts[0], u) < 1e-5


def test_frame_not_smooth_on_strict_examples(round_s3):
    with pytest.raises(FrameNotSmooth):
        ex.codazzi_residual(round_s3.charts[0], np.array([0.4, 0.1, -0.2]))
    with pytest.raises(FrameNotSmooth):
        ex.codazzi_residual(affine_chart(), np.array([0.5, 0.5, 0.5]))


def test_product_connection_form_vanishes(product):
    field = ex.FrameField(product.charts[0], np.array([0.45, 0.3, -0.2, 0.5]))
    w = field.w_coord(np.array([0.45, 0.3, -0.2, 0.5]), 1e-4)
    assert np.abs(w).max() < 1e-6


def test_no_quadrant_frame_on_negative_curvature():
    # saddle z = x^2 - y^2 in R^3 c R^4: mixed-sign curvature
    def comps(v):
        x, y = v
        return [x, y, x * x - y * y, x * 0.0]
    saddle = Chart("saddle", 2, 4, ((-1, 1), (-1, 1)),
                   map_from_components(comps))
    with pytest.raises(NoQuadrantFrame):
        ex.weinstein_frame(saddle, np.array([0.1, -0.2]))


def test_ambiguous_rank_guard(product):
    # scaling one factor's curvature near the rank cutoff trips the guard
    frame = ex.weinstein_frame(product.charts[0],
                               np.array([0.3, 0.1, -0.4, 0.2]))
    frame.B[:] = frame.B * 1e-7
    with pytest.raises(AmbiguousRank):
        ex.classify_point(frame, rank_tol=1e-7)


def test_ricci_from_shape_matches_intrinsic(switched):
    from codim2lab.curvature import curvature_data, ricci_on
    chart = switched.charts[0]
    pts = np.array([[0.8, 1.0, 2.0], [-0.9, 0.5, 1.5]])
    fb = ex.frame_batch(chart, pts)
    ric_ext = ex.ricci_from_shape(fb.alpha[..., 0], fb.alpha[..., 1])
    ric_int = ricci_on(curvature_data(chart, pts))
    np.testing.assert_allclose(np.linalg.eigvalsh(ric_ext),
                               np.linalg.eigvalsh(ric_int), atol=1e-9)
