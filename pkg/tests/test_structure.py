"""Nullity, splitting tensor, Riccati, connection form, leaves."""
import numpy as np
import pytest

from codim2lab import gallery, structure as st
from codim2lab.errors import LeafNotClosed, NullityNotLine


@pytest.fixture(scope="module")
def cone():
    return gallery.synthetic_cone()


@pytest.fixture(scope="module")
def cylquot():
    return gallery.cylinder_quotient()


@pytest.fixture(scope="module")
def switched():
    return gallery.switched_sphere(eps=0.2)


def test_nullity_dimensions(cone, cylquot):
    nd = st.nullity(cone.charts[0], np.array([1.5, 1.2, 2.0]))
    assert nd.mu == 1 and nd.nu == 1

    ls = cylquot.leaf_structure[0]
    nd = st.nullity(ls["chart"], np.array([0.3, 1.1, 0.8]))
    assert nd.mu == 1 and nd.nu == 0

    rs = gallery.round_sphere()
    nd = st.nullity(rs.charts[0], np.array([0.3, 0.2, -0.4]))
    assert nd.mu == 0

    # flat chart: full nullity
    from codim2lab.charts import Chart, map_from_components
    def comps(v):
        x, y, z = v
        return [x, y, z, x * 0.0, y * 0.0]
    flat = Chart("flat", 3, 5, ((0, 1),) * 3, map_from_components(comps))
    nd = st.nullity(flat, np.array([0.5, 0.5, 0.5]))
    assert nd.mu == 3


def test_delta_inside_gamma(switched):
    """Relative nullity sits inside the curvature nullity (angle check)."""
    chart = switched.charts[0]
    for t in (0.05, 0.9, -0.8):
        nd = st.nullity(chart, np.array([t, 1.0, 2.0]))
        assert nd.nu <= nd.mu
        if nd.nu:
            overlap = np.linalg.svd(nd.gamma_basis.T @ nd.delta_basis,
                                    compute_uv=False)
            assert overlap[-1] > 1.0 - 1e-6


def test_cone_splitting_tensor_closed_form(cone):
    chart = cone.charts[0]
    for t0 in (0.8, 1.5, 2.0):
        nrm = st.splitting_norm(chart, np.array([t0, 1.2, 2.0]))
        assert nrm == pytest.approx(1.0 / t0, rel=1e-6)
    assert st.splitting_norm(chart, np.array([1.5, 1.2, 2.0])) > 0.1


def test_cone_riccati_closed_form(cone):
    # C(t) = C0 (I - t C0)^{-1} along the radial leaf, here C = -Id/t
    pts = np.stack([np.linspace(1.0, 2.0, 17), np.full(17, 1.2),
                    np.full(17, 2.0)], axis=1)
    assert st.riccati_residual(cone.charts[0], pts) < 1e-3


def test_product_splitting_vanishes(cylquot, switched):
    ls = cylquot.leaf_structure[0]
    assert st.splitting_norm(ls["chart"], np.array([0.31, 1.1, 0.8])) < 1e-5
    assert st.splitting_norm(switched.charts[0],
                             np.array([0.9, 1.0, 2.0])) < 1e-5


def test_riccati_on_gallery_leaf(switched):
    anchor = switched.leaf_structure[0]
    pts = np.stack([np.full(9, 1.0), np.full(9, 1.3),
                    np.linspace(0.2, 1.2, 9)], axis=1)
    assert st.riccati_residual(anchor["chart"], pts) < 1e-4


def test_nullity_not_line_on_flat(cone):
    from codim2lab.charts import Chart, map_from_components
    def comps(v):
        x, y, z = v
        return [x, y, z, x * 0.0, y * 0.0]
    flat = Chart("flat", 3, 5, ((0, 1),) * 3, map_from_components(comps))
    with pytest.raises(NullityNotLine):
        st.splitting_norm(flat, np.array([0.5, 0.5, 0.5]))


def test_connection_form_products(cylquot, switched):
    assert st.w_along_nullity(cylquot.leaf_structure[0]["chart"],
                              np.array([0.31, 1.1, 0.8])) < 1e-6
    assert st.w_along_nullity(switched.charts[0],
                              np.array([0.9, 1.0, 2.0])) < 1e-6


def test_composition_criterion(cylquot, switched):
    ok, worst = st.composition_criterion(
        cylquot.leaf_structure[0]["chart"], np.array([[0.31, 1.1, 0.8]]))
    assert ok and worst < 1e-6
    ok, worst = st.composition_criterion(
        switched.charts[0], np.array([[0.9, 1.0, 2.0]]))
    assert ok

    # wrong stratum: U_2 points of a product of spheres are not rank-one-B
    prod = gallery.product_spheres(2, 2)
    with pytest.raises(NullityNotLine):
        st.composition_criterion(prod.charts[0],
                                 np.array([[0.3, 0.1, -0.4, 0.2]]))


def test_leaf_total_curvature_circle(switched):
    ls = switched.leaf_structure[0]
    _, kappa = st.trace_leaf(ls["chart"], np.array([1.0, 1.3, 0.31]),
                             ls["period_hint"], h=ls["period_hint"] / 700,
                             wrap=ls["wrap"])
    assert kappa == pytest.approx(2 * np.pi, rel=1e-5)


def test_leaf_curvature_scale_invariant(cylquot):
    """Total curvature of a circle leaf is radius independent."""
    big = gallery.cylinder_quotient(period=2.0)
    ls = big.leaf_structure[0]
    L, K = st.trace_leaf(ls["chart"], np.array([0.6, 1.1, 0.8]),
                         ls["period_hint"], wrap=ls["wrap"])
    assert L == pytest.approx(2.0, rel=1e-6)
    assert K == pytest.approx(2 * np.pi, rel=1e-5)

    ls1 = cylquot.leaf_structure[0]
    _, K1 = st.trace_leaf(ls1["chart"], np.array([0.3, 1.1, 0.8]),
                          ls1["period_hint"], wrap=ls1["wrap"])
    assert K1 == pytest.approx(K, rel=1e-5)


def test_leaf_not_closed_without_deck(cone):
    # radial leaves of the cone are straight segments: never return
    with pytest.raises(LeafNotClosed):
        st.trace_leaf(cone.charts[0], np.array([1.0, 1.2, 2.0]),
                      period_hint=1.0)


def test_leaf_reparametrization_invariance(cylquot):
    """kappa_g agrees when traced at different step resolutions."""
    ls = cylquot.leaf_structure[0]
    chart = ls["chart"]
    u0 = np.array([0.31, 0.7, 1.9])
    _, k1 = st.trace_leaf(chart, u0, ls["period_hint"],
                          h=ls["period_hint"] / 900, wrap=ls["wrap"])
    _, k2 = st.trace_leaf(chart, u0, ls["period_hint"],
                          h=ls["period_hint"] / 2100, wrap=ls["wrap"])
    assert k1 == pytest.approx(k2, rel=1e-6)
