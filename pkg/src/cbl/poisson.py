"""Per-mode Biot-Savart inversion: Dirichlet solves of (d_yy - k^2) psi = omega."""

from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .grid import ChannelGrid, _check_shape, barycentric_matrix, inner_product


def _sinh_ratio(a, b, c):
    """sinh(a) sinh(b) / sinh(c) for 0 <= a, b and a + b <= c, overflow-free."""
    return (
        np.exp(a + b - c)
        * (-np.expm1(-2.0 * a))
        * (-np.expm1(-2.0 * b))
        / (2.0 * -np.expm1(-2.0 * c))
    )


def greens_gk(k, y, yp):
    """Green's function of ``d_yy - k^2`` on [-1, 1] with Dirichlet walls.

    Vectorized over ``y`` and ``yp``; evaluated in exponential form so it
    does not overflow for large ``|k|``.
    """
    if k == 0:
        raise ValueError("greens_gk needs k != 0; use greens_zero for the zero mode")
    ak = abs(float(k))
    y = np.asarray(y, dtype=float)
    yp = np.asarray(yp, dtype=float)
    hi = np.maximum(y, yp)
    lo = np.minimum(y, yp)
    a = np.clip(ak * (1.0 - hi), 0.0, None)
    b = np.clip(ak * (1.0 + lo), 0.0, None)
    return -_sinh_ratio(a, b, 2.0 * ak) / ak


def greens_gk_dy(k, y, yp):
    """Partial derivative of :func:`greens_gk` in its first argument.

    At ``y == yp`` the one-sided average is returned.
    """
    ak = abs(float(k))
    y = np.asarray(y, dtype=float)
    yp = np.asarray(yp, dtype=float)
    s = -np.expm1(-4.0 * ak)
    # y < yp: G = -sinh(k(1-yp)) sinh(k(1+y)) / (k sinh 2k)
    a = ak * (1.0 - yp)
    b = ak * (1.0 + y)
    left = -(np.exp(a + b - 2 * ak) * -np.expm1(-2 * a) * (1 + np.exp(-2 * b))) / (2 * s)
    # y > yp: G = -sinh(k(1-y)) sinh(k(1+yp)) / (k sinh 2k)
    a2 = ak * (1.0 - y)
    b2 = ak * (1.0 + yp)
    right = (np.exp(a2 + b2 - 2 * ak) * (1 + np.exp(-2 * a2)) * -np.expm1(-2 * b2)) / (2 * s)
    return np.where(y < yp, left, np.where(y > yp, right, 0.5 * (left + right)))


class ModePoissonSolver:
    """Direct collocation solver for ``Delta_k psi = omega`` with ``psi(+-1) = 0``.

    Also carries the closed-form kernel at the nodes and a dense Green's
    matrix for cross-validation.  The matrix integrates the Lobatto
    interpolant against ``G_k(y_i, .)`` separately on ``[-1, y_i]`` and
    ``[y_i, 1]`` so the kink on the diagonal does not spoil the accuracy.
    Both are built on first use.
    """

    def __init__(self, k: int, grid: ChannelGrid):
        if k == 0:
            raise ValueError("ModePoissonSolver needs k != 0")
        self.k = int(k)
        self.grid = grid
        n = grid.size
        lap = grid.d2 - self.k**2 * np.eye(n)
        lap[0, :] = 0.0
        lap[-1, :] = 0.0
        lap[0, 0] = lap[-1, -1] = 1.0
        self._lu = sla.lu_factor(lap)
        if np.any(np.abs(np.diag(self._lu[0])) < 1e-300):
            raise ArithmeticError(f"singular Poisson operator at k={k}")

    @cached_property
    def kernel(self) -> np.ndarray:
        y = self.grid.nodes
        return greens_gk(self.k, y[:, None], y[None, :])

    @cached_property
    def green_matrix(self) -> np.ndarray:
        grid = self.grid
        y = grid.nodes
        order = grid.n_y // 2 + 2 * abs(self.k) + 32
        xg, wg = np.polynomial.legendre.leggauss(order)
        mat = np.zeros((grid.size, grid.size))
        for i in range(1, grid.size - 1):
            for lo, hi in ((-1.0, y[i]), (y[i], 1.0)):
                half = 0.5 * (hi - lo)
                pts = lo + half * (xg + 1.0)
                weights = half * wg * greens_gk(self.k, y[i], pts)
                mat[i] += weights @ barycentric_matrix(y, pts)
        return mat

    def solve(self, omega):
        _check_shape(self.grid, omega)
        rhs = np.array(omega, dtype=complex)
        rhs[0] = rhs[-1] = 0.0
        return sla.lu_solve(self._lu, rhs)

    def solve_green(self, omega):
        """psi by quadrature against the closed-form Green's function."""
        _check_shape(self.grid, omega)
        return self.green_matrix @ np.asarray(omega, dtype=complex)

    def laplacian(self, psi):
        psi = np.asarray(psi)
        return self.grid.d2 @ psi - self.k**2 * psi


_SOLVERS: dict = {}


def poisson_solver(k: int, grid: ChannelGrid) -> ModePoissonSolver:
    key = (int(k), grid.n_y, id(grid))
    s = _SOLVERS.get(key)
    if s is None or s.grid is not grid:
        s = ModePoissonSolver(k, grid)
        _SOLVERS[key] = s
    return s


def solve_poisson_k(k: int, omega, grid: ChannelGrid):
    """Stream function for mode ``k`` from vorticity ``omega``."""
    return poisson_solver(k, grid).solve(omega)


def velocity_from_psi(k: int, psi, grid: ChannelGrid):
    """Velocity components ``(d_y psi, -i k psi)`` of mode ``k``."""
    psi = np.asarray(psi, dtype=complex)
    return grid.d1 @ psi, -1j * k * psi


def vorticity_identity_check(k: int, psi, grid: ChannelGrid) -> dict:
    """Compare both sides of the vorticity/stream-function norm identity.

    ``||omega||^2 = k^4 ||psi||^2 + ||psi''||^2 + 2 k^2 ||psi'||^2`` holds for
    Dirichlet ``psi`` after integrating by parts; the lower bound
    ``||omega||^2 >= (|k| ||psi|| + |k| ||psi'||)^2 / 2`` follows from it.
    """
    psi = np.asarray(psi, dtype=complex)
    dpsi = grid.d1 @ psi
    ddpsi = grid.d1 @ dpsi
    omega = ddpsi - k**2 * psi
    n_psi = inner_product(grid, psi, psi).real
    n_dpsi = inner_product(grid, dpsi, dpsi).real
    n_ddpsi = inner_product(grid, ddpsi, ddpsi).real
    lhs = inner_product(grid, omega, omega).real
    rhs = k**4 * n_psi + n_ddpsi + 2 * k**2 * n_dpsi
    scale = max(abs(lhs), abs(rhs))
    defect = abs(lhs - rhs) / scale if scale > 0 else 0.0
    lower = 0.5 * (abs(k) * np.sqrt(n_psi) + abs(k) * np.sqrt(n_dpsi)) ** 2
    return {
        "lhs": lhs,
        "rhs": rhs,
        "relative_defect": defect,
        "lower_bound": lower,
        "inequality_holds": bool(lhs >= lower * (1 - 1e-12)),
    }
