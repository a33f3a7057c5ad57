import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from darcy_benard.element import (
    Q1, Q2, ReferenceElement, gauss_rule, map_to_physical, shape_gradients, shape_values,
)
from darcy_benard.mesh import build_unit_square

unit = st.floats(0.0, 1.0, allow_nan=False)


def test_q1_nodal_at_origin():
    assert np.array_equal(shape_values(Q1, (0.0, 0.0)), [1.0, 0.0, 0.0, 0.0])


def test_q2_center_node():
    v = shape_values(Q2, (0.5, 0.5))
    assert v[8] == 1.0
    assert np.all(v[:4] == 0.0)


def test_q1_interior_values():
    v = shape_values(Q1, (0.25, 0.75))
    assert np.allclose(v, [0.1875, 0.0625, 0.1875, 0.5625])
    assert abs(v.sum() - 1.0) < 1e-15


def test_q1_ccw_product_form():
    # basis k is the product for corner k in (0,0),(1,0),(1,1),(0,1) order
    xi, eta = 0.25, 0.75
    expected = [(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta]
    assert np.allclose(shape_values(Q1, (xi, eta)), expected)


def test_q2_node_ordering():
    expected = [(0, 0), (1, 0), (1, 1), (0, 1), (0.5, 0), (1, 0.5), (0.5, 1), (0, 0.5), (0.5, 0.5)]
    assert np.allclose(Q2.node_coords, expected)


@pytest.mark.parametrize("elem", [Q1, Q2])
def test_nodal_duality(elem):
    vals = shape_values(elem, elem.node_coords)
    assert np.array_equal(vals, np.eye(elem.nodes_per_cell))


@pytest.mark.parametrize("elem", [Q1, Q2])
def test_partition_of_unity_random_points(elem, rng):
    p = rng.random((100, 2))
    assert np.max(np.abs(shape_values(elem, p).sum(axis=1) - 1.0)) <= 1e-14
    assert np.max(np.abs(shape_gradients(elem, p).sum(axis=1))) <= 1e-13


@given(xi=unit, eta=unit)
def test_gradient_sum_zero_property(xi, eta):
    for elem in (Q1, Q2):
        assert np.allclose(shape_gradients(elem, (xi, eta)).sum(axis=0), 0.0, atol=1e-13)


def test_q1_gradient_at_origin():
    assert np.allclose(shape_gradients(Q1, (0.0, 0.0))[0], [-1.0, -1.0])


@pytest.mark.parametrize("elem", [Q1, Q2])
def test_gradients_match_central_differences(elem, rng):
    eps = 1e-6
    for p in rng.uniform(0.01, 0.99, size=(20, 2)):
        g = shape_gradients(elem, p)
        dx = (shape_values(elem, p + [eps, 0]) - shape_values(elem, p - [eps, 0])) / (2 * eps)
        dz = (shape_values(elem, p + [0, eps]) - shape_values(elem, p - [0, eps])) / (2 * eps)
        assert np.max(np.abs(g[:, 0] - dx)) <= 1e-8
        assert np.max(np.abs(g[:, 1] - dz)) <= 1e-8


@pytest.mark.parametrize("p", [(-0.1, 0.5), (0.5, 1.01)])
def test_rejects_points_outside_reference_cell(p):
    with pytest.raises(ValueError):
        shape_values(Q2, p)
    with pytest.raises(ValueError):
        shape_gradients(Q1, p)


def test_reference_element_rejects_order_3():
    with pytest.raises(ValueError):
        ReferenceElement(3)


def test_midpoint_rule():
    r = gauss_rule(1)
    assert np.allclose(r.points, [[0.5, 0.5]]) and np.allclose(r.weights, [1.0])


def test_gauss2_cubic_exact():
    r = gauss_rule(2)
    val = np.sum(r.weights * r.points[:, 0] ** 3 * r.points[:, 1] ** 3)
    assert abs(val - 1 / 16) < 1e-15


def test_gauss3_quintic():
    r = gauss_rule(3)
    assert abs(np.sum(r.weights * r.points[:, 0] ** 5) - 1 / 6) <= 1e-15


@pytest.mark.parametrize("q", [0, 7])
def test_gauss_rule_range(q):
    with pytest.raises(ValueError):
        gauss_rule(q)


@pytest.mark.parametrize("q", range(1, 7))
def test_gauss_exactness_random_polynomials(q, rng):
    r = gauss_rule(q)
    assert abs(r.weights.sum() - 1.0) < 1e-14
    deg = 2 * q - 1
    for _ in range(5):
        c = rng.standard_normal((deg + 1, deg + 1))
        exact = sum(c[i, j] / ((i + 1) * (j + 1)) for i in range(deg + 1) for j in range(deg + 1))
        x, z = r.points[:, 0], r.points[:, 1]
        vals = sum(c[i, j] * x**i * z**j for i in range(deg + 1) for j in range(deg + 1))
        assert abs(np.sum(r.weights * vals) - exact) <= 1e-13 * max(1.0, abs(exact))


def test_map_to_physical():
    x, det, inv = map_to_physical(build_unit_square(1), 0, (0.5, 0.5))
    assert np.allclose(x, [0.5, 0.5]) and det == 1.0 and np.allclose(inv, np.eye(2))
    x, det, _ = map_to_physical(build_unit_square(2), 0, (1.0, 1.0))
    assert np.allclose(x, [0.5, 0.5]) and det == 0.25
    m4 = build_unit_square(4)
    for c in range(m4.n_cells):
        _, det, inv = map_to_physical(m4, c, (0.3, 0.3))
        assert det == 1 / 16 and np.allclose(inv, 4 * np.eye(2))
