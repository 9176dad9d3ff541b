import mpmath
import numpy as np
import pytest

from cbl.grid import make_grid
from cbl.poisson import (
    greens_gk, poisson_solver, solve_poisson_k, velocity_from_psi, vorticity_identity_check,
)
from conftest import sine_half


def test_greens_value_at_center():
    oracle = float(-mpmath.sinh(1) ** 2 / mpmath.sinh(2))
    assert float(greens_gk(1, 0.0, 0.0)) == pytest.approx(oracle, rel=1e-14)
    assert oracle == pytest.approx(-0.380798, abs=1e-6)


def test_greens_boundary_and_symmetry():
    assert greens_gk(3, 1.0, 0.2) == 0.0
    assert greens_gk(2, 0.3, -0.4) == greens_gk(2, -0.4, 0.3)


def test_greens_large_k_is_finite():
    assert np.isfinite(greens_gk(500, 0.1, 0.1))


def test_solve_zero(grid64):
    assert np.all(solve_poisson_k(3, np.zeros(65), grid64) == 0)


def test_manufactured_solution_k2(grid64):
    y = grid64.nodes
    psi = solve_poisson_k(2, -2 - 4 * (1 - y**2), grid64)
    np.testing.assert_allclose(psi, 1 - y**2, atol=1e-8)


def test_eigenfunction_k1(grid64):
    y = grid64.nodes
    psi = solve_poisson_k(1, -(1 + np.pi**2 / 4) * sine_half(y), grid64)
    np.testing.assert_allclose(psi, sine_half(y), atol=1e-10)


@pytest.mark.parametrize("k", [1, 4, 16])
def test_green_matrix_matches_direct_solve(k, grid128):
    y = grid128.nodes
    omega = np.exp(y) * np.cos(3 * y)
    sol = poisson_solver(k, grid128)
    direct = sol.solve(omega)
    assert grid128.norm(sol.solve_green(omega) - direct) <= 1e-10 * grid128.norm(direct)


def test_zero_mode_rejected(grid64):
    with pytest.raises(ValueError):
        poisson_solver(0, grid64)


def test_velocity_of_parabola(grid64):
    y = grid64.nodes
    u1, u2 = velocity_from_psi(1, 1 - y**2, grid64)
    np.testing.assert_allclose(u1, -2 * y, atol=1e-12)
    np.testing.assert_allclose(u2, -1j * (1 - y**2), atol=1e-14)
    assert velocity_from_psi(1, np.zeros(65), grid64)[0].tolist() == [0] * 65


def test_velocity_is_divergence_free(grid64, rng):
    y = grid64.nodes
    psi = (1 - y**2) * np.polynomial.chebyshev.chebval(y, rng.standard_normal(10))
    k = 3
    u1, u2 = velocity_from_psi(k, psi, grid64)
    assert np.max(np.abs(1j * k * u1 + grid64.d1 @ u2)) <= 1e-10


def test_identity_on_sine(grid64):
    chk = vorticity_identity_check(1, sine_half(grid64.nodes), grid64)
    assert chk["relative_defect"] <= 1e-8
    expected = 1 + 2 * (np.pi / 2) ** 2 + (np.pi / 2) ** 4
    assert chk["lhs"] == pytest.approx(expected, rel=1e-8)


def test_identity_zero(grid64):
    chk = vorticity_identity_check(2, np.zeros(65), grid64)
    assert chk["lhs"] == chk["rhs"] == 0.0


def test_identity_inequality_on_random_psi(grid64, rng):
    y = grid64.nodes
    for _ in range(100):
        k = int(rng.integers(1, 9))
        c = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        chk = vorticity_identity_check(k, (1 - y**2) * np.polynomial.chebyshev.chebval(y, c), grid64)
        assert chk["inequality_holds"]
        assert chk["relative_defect"] <= 1e-10


def test_solver_cache_is_per_grid():
    a, b = make_grid(16), make_grid(16)
    assert poisson_solver(2, a).grid is a
    assert poisson_solver(2, b).grid is b
