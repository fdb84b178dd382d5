import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qchlab import jets
from qchlab.jets import Jet

pts = np.array([[0.3, -0.2, 0.7, 1.1], [-0.5, 0.4, -0.9, 0.2]])


def coords(order=2):
    return [Jet.coordinate(pts, i, order) for i in range(4)]


def numeric_derivs(f, p, h=1e-4):
    """Central differences of a scalar function of a 4-vector."""
    g = np.zeros(4)
    H = np.zeros((4, 4))
    for i in range(4):
        e = np.eye(4)[i] * h
        g[i] = (f(p + e) - f(p - e)) / (2 * h)
        for j in range(4):
            ej = np.eye(4)[j] * h
            H[i, j] = (f(p + e + ej) - f(p + e - ej) - f(p - e + ej) + f(p - e - ej)) / (4 * h * h)
    return g, H


def test_coordinate_jet_is_identity_gradient():
    x = Jet.coordinate(pts, 2)
    assert np.allclose(x.val, pts[:, 2])
    assert np.allclose(x.grad[2], 1) and np.allclose(x.grad[[0, 1, 3]], 0)
    assert np.allclose(x.hess, 0)


def test_product_and_chain_rule_against_finite_differences():
    x, y, z, t = coords()
    J = jets.exp(x * y) * jets.sin(z + 0.5 * t) / (2.0 + jets.cos(x)) + jets.sqrt(1.5 + y * y) * jets.log(2.0 + z)

    def f(p):
        x, y, z, t = p
        return np.exp(x * y) * np.sin(z + 0.5 * t) / (2 + np.cos(x)) + np.sqrt(1.5 + y * y) * np.log(2 + z)

    for n, p in enumerate(pts):
        g, H = numeric_derivs(f, p)
        assert np.allclose(J.grad[:, n], g, rtol=1e-6, atol=1e-8)
        assert np.allclose(J.hess[:, :, n], H, rtol=1e-5, atol=1e-6)


def test_hessian_symmetric():
    x, y, z, t = coords()
    J = jets.tanh(x * z) * jets.sinh(y - t) + (x * t) ** 3
    assert np.allclose(J.hess, np.swapaxes(J.hess, 0, 1), rtol=1e-14, atol=1e-14)


def test_inverse_and_determinant_match_finite_differences():
    x, y, z, t = coords()
    M = jets.stack([jets.stack([2.0 + x, y * z], 1), jets.stack([jets.sin(t), 3.0 + x * y], 1)], 1)
    Minv = jets.inv(M)
    prod = jets.einsum("nab,nbc->nac", M, Minv)
    assert np.allclose(prod.val, np.eye(2))
    assert np.allclose(prod.grad, 0, atol=1e-13)
    assert np.allclose(prod.hess, 0, atol=1e-12)

    def f(p):
        x, y, z, t = p
        return np.linalg.det(np.array([[2 + x, np.sin(t)], [y * z, 3 + x * y]]))

    D = jets.det(M)
    g, H = numeric_derivs(f, pts[0])
    assert np.allclose(D.grad[:, 0], g, rtol=1e-6)
    assert np.allclose(D.hess[:, :, 0], H, rtol=1e-5, atol=1e-6)


def test_d_lowers_order_and_exposes_gradient():
    x, y, z, t = coords()
    J = x * x * y
    d = J.d()
    assert d.order == 1
    assert np.allclose(d.val[:, 0], 2 * pts[:, 0] * pts[:, 1])
    assert np.allclose(d.grad[0, :, 0], 2 * pts[:, 1])


def test_truncate_drops_higher_terms():
    x = Jet.coordinate(pts, 0)
    assert x.truncate(0).order == 0
    assert x.truncate(1).hess is None


@settings(max_examples=40, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.1, 3), st.floats(-3, 3))
def test_power_rule_matches_closed_form(a, b, p, q):
    P = np.array([[a, b, p, q]])
    z = Jet.coordinate(P, 2)
    J = z ** 2.5
    assert np.isclose(J.grad[2, 0], 2.5 * p ** 1.5)
    assert np.isclose(J.hess[2, 2, 0], 2.5 * 1.5 * p ** 0.5)
