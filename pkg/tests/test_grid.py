import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbl.grid import barycentric_matrix, inner_product, make_grid, sobolev_h4_norm
from conftest import sine_half


def test_three_point_nodes():
    assert make_grid(2).nodes.tolist() == [1.0, 0.0, -1.0]


def test_d1_differentiates_linear_exactly():
    g = make_grid(4)
    np.testing.assert_allclose(g.d1 @ g.nodes, np.ones(5), atol=1e-13)


def test_d2_differentiates_quadratic_exactly():
    g = make_grid(4)
    np.testing.assert_allclose(g.d2 @ g.nodes**2, 2 * np.ones(5), atol=1e-12)


def test_arrays_are_read_only():
    g = make_grid(8)
    with pytest.raises(ValueError):
        g.d1[0, 0] = 1.0


@pytest.mark.parametrize("f,g,expected", [
    (lambda y: np.ones_like(y), lambda y: np.ones_like(y), 2.0),
    (sine_half, sine_half, 1.0),
    (lambda y: np.ones_like(y), lambda y: y, 0.0),
])
def test_inner_product_examples(grid64, f, g, expected):
    y = grid64.nodes
    assert inner_product(grid64, f(y), g(y)) == pytest.approx(expected, abs=1e-13)


def test_inner_product_rejects_wrong_shape(grid64):
    with pytest.raises(ValueError):
        inner_product(grid64, np.ones(3), np.ones(3))


def test_h4_norm_of_sine_matches_closed_form(grid64):
    expected = np.sqrt(sum((np.pi / 2) ** (2 * j) for j in range(5)))
    assert sobolev_h4_norm(grid64, sine_half(grid64.nodes)) == pytest.approx(expected, rel=1e-9)
    assert expected == pytest.approx(7.851, abs=1e-3)


def test_h4_norm_of_constants(grid64):
    assert sobolev_h4_norm(grid64, np.zeros(65)) == 0.0
    assert sobolev_h4_norm(grid64, -3.0 * np.ones(65)) == pytest.approx(3 * np.sqrt(2), rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 40).filter(lambda n: n % 2 == 0), st.integers(0, 60))
def test_clenshaw_curtis_integrates_polynomials(n, deg):
    g = make_grid(n)
    exact = 0.0 if deg % 2 else 2.0 / (deg + 1)
    val = g.integrate(g.nodes**deg)
    if deg <= n:
        assert val == pytest.approx(exact, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=1, max_size=10))
def test_barycentric_reproduces_polynomials(xs):
    g = make_grid(16)
    p = np.polynomial.Polynomial([0.3, -1.0, 0.5, 2.0, 0.0, -0.7])
    x = np.array(xs)
    np.testing.assert_allclose(barycentric_matrix(g.nodes, x) @ p(g.nodes), p(x), atol=1e-12)
