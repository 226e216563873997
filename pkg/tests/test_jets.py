"""Jet arithmetic against symbolic and finite-difference ground truth."""
import numpy as np
import pytest

from codim2lab import jets
from codim2lab.jets import jcos, jexp, jlog, jreciprocal, jsin, jsqrt


def test_polynomial_jets_exact():
    # u -> (u, u^2): values (1, 1), first (1, 2), second (0, 2)
    u = np.array([[1.0]])
    x = jets.variables(u)[0]
    f1, f2 = x, x * x
    assert f1.f[0] == 1.0 and f2.f[0] == 1.0
    assert f1.d1[0, 0] == 1.0 and f2.d1[0, 0] == 2.0
    assert f1.d2[0, 0, 0] == 0.0 and f2.d2[0, 0, 0] == 2.0
    assert f2.d3[0, 0, 0, 0] == 0.0


def test_affine_chart_higher_orders_vanish():
    u = np.array([[0.3, -0.7]])
    x, y = jets.variables(u)
    lin = 2.0 * x - 3.0 * y + 5.0
    assert np.all(lin.d2 == 0) and np.all(lin.d3 == 0)


def _fd_check(fn, u0, rel=1e-6):
    """Compare jet derivatives to central differences at a point."""
    n = len(u0)
    x = jets.variables(np.array([u0]))
    out = fn(x)
    h = 1e-5

    def val(u):
        return fn(jets.variables(np.array([u]))).f[0]

    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        fd = (val(u0 + e) - val(u0 - e)) / (2 * h)
        assert out.d1[0, i] == pytest.approx(fd, rel=rel, abs=1e-8)
        for j in range(n):
            ej = np.zeros(n)
            ej[j] = h
            fd2 = (val(u0 + e + ej) - val(u0 + e - ej)
                   - val(u0 - e + ej) + val(u0 - e - ej)) / (4 * h * h)
            assert out.d2[0, i, j] == pytest.approx(fd2, rel=1e-4, abs=1e-5)


def test_transcendental_composition_vs_finite_differences():
    def fn(v):
        x, y = v
        return jsin(x * y) * jexp(x) + jsqrt(2.0 + jcos(y)) / (1.0 + x * x)
    _fd_check(fn, np.array([0.4, 1.3]))


def test_log_reciprocal_derivatives():
    x = jets.variables(np.array([[2.0]]))[0]
    lg = jlog(x)
    assert lg.d1[0, 0] == pytest.approx(0.5)
    assert lg.d2[0, 0, 0] == pytest.approx(-0.25)
    assert lg.d3[0, 0, 0, 0] == pytest.approx(0.25)
    rc = jreciprocal(x)
    assert rc.d3[0, 0, 0, 0] == pytest.approx(-6.0 / 16.0)


def test_third_order_product_rule():
    # d^3/dx^3 [x^3 * sin(x)] at x0, against the symbolic expansion
    x0 = 0.7
    x = jets.variables(np.array([[x0]]))[0]
    f = x * x * x * jsin(x)
    s, c = np.sin(x0), np.cos(x0)
    d3 = 6 * s + 18 * x0 * c - 9 * x0**2 * s - x0**3 * c
    assert f.d3[0, 0, 0, 0] == pytest.approx(d3, rel=1e-12)


def test_where_selects_coefficients():
    u = np.array([[0.5], [2.0]])
    x = jets.variables(u)[0]
    a, b = x * x, 3.0 * x
    w = jets.where(u[:, 0] < 1.0, a, b)
    assert w.f[0] == 0.25 and w.f[1] == 6.0
    assert w.d1[0, 0] == 1.0 and w.d1[1, 0] == 3.0


def test_division_matches_reciprocal_multiplication():
    u = np.array([[0.9, -0.4]])
    x, y = jets.variables(u)
    q = (1.0 + x * y) / (2.0 + jcos(x))
    r = (1.0 + x * y) * jreciprocal(2.0 + jcos(x))
    np.testing.assert_allclose(q.d3, r.d3, atol=1e-14)


def test_batched_evaluation_matches_pointwise():
    pts = np.array([[0.1, 0.2], [1.0, -0.5], [2.0, 0.3]])

    def fn(v):
        x, y = v
        return jexp(x * 0.5) * jsin(y) + x * y * y

    batch = fn(jets.variables(pts))
    for b in range(3):
        single = fn(jets.variables(pts[b:b + 1]))
        np.testing.assert_allclose(batch.f[b], single.f[0], rtol=1e-15)
        np.testing.assert_allclose(batch.d3[b], single.d3[0], rtol=1e-13)
