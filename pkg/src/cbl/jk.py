"""Dense discretization of the singular integral operator J_k.

``J_k[f](y) = k * p.v. int G_k(y, y') f(y') / (2 i (y - y')) dy'``

The principal value is handled by subtract-and-add: for each target node
``y_i`` the integrand is split as

    [G_k(y_i, y') p(y') - G_k(y_i, y_i) p(y_i)] / (y_i - y')
        + G_k(y_i, y_i) p(y_i) / (y_i - y')

where ``p`` is the Lobatto interpolant of the nodal data.  The first part is
analytic on each side of ``y' = y_i`` (the kink of ``G_k`` sits exactly at
the split point) and is integrated by Gauss-Legendre on ``[-1, y_i]`` and
``[y_i, 1]`` separately.  The second part has the closed-form principal
value ``log((1 + y_i) / (1 - y_i))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import ChannelGrid, _check_shape, barycentric_matrix
from .poisson import greens_gk


@dataclass(frozen=True, eq=False)
class JkOperator:
    k: int
    grid: ChannelGrid
    matrix: np.ndarray
    diag_strategy: str

    def __call__(self, f):
        return apply_jk(self, f)

    def adjoint(self) -> np.ndarray:
        """Adjoint matrix in the quadrature-weighted inner product."""
        w = self.grid.quad_weights
        return (self.matrix.conj().T * w[None, :]) / w[:, None]


def _gauss_points(order: int):
    return np.polynomial.legendre.leggauss(order)


def _quad_order(grid: ChannelGrid, k: int) -> int:
    return grid.n_y + 2 * abs(k) + 32


def build_jk(k: int, grid: ChannelGrid, quad_order: int | None = None) -> JkOperator:
    """Assemble the matrix of ``J_k`` acting on nodal values."""
    if k == 0:
        raise ValueError("J_k is defined for k != 0 only")
    k = int(k)
    y = grid.nodes
    n = grid.size
    order = quad_order or _quad_order(grid, k)
    xg, wg = _gauss_points(order)
    mat = np.zeros((n, n), dtype=complex)
    for i in range(1, n - 1):
        yi = y[i]
        gii = float(greens_gk(k, yi, yi))
        row = np.zeros(n)
        for lo, hi in ((-1.0, yi), (yi, 1.0)):
            half = 0.5 * (hi - lo)
            pts = lo + half * (xg + 1.0)
            wts = half * wg
            interp = barycentric_matrix(y, pts)
            g = greens_gk(k, yi, pts)
            dist = yi - pts
            row += (wts * g / dist) @ interp
            row[i] -= gii * np.sum(wts / dist)
        row[i] += gii * np.log((1.0 + yi) / (1.0 - yi))
        mat[i] = row
    # G_k vanishes for y = +-1, so the boundary rows stay zero
    mat *= k / 2j
    mat.setflags(write=False)
    return JkOperator(
        k=k,
        grid=grid,
        matrix=mat,
        diag_strategy=(
            "product integration of the Lobatto interpolant; Gauss-Legendre "
            f"order {order} on each side of the target node; analytic p.v. "
            "of 1/(y-y') for the subtracted diagonal"
        ),
    )


def apply_jk(op: JkOperator, f):
    _check_shape(op.grid, f)
    return op.matrix @ np.asarray(f, dtype=complex)


def resolved_basis(grid: ChannelGrid, degree: int | None = None) -> np.ndarray:
    """Weighted-orthonormal basis of ``(1 - y^2) T_j(y)``, ``j <= degree - 2``.

    The columns span smooth functions vanishing at the walls and satisfy
    ``Q^H W Q = I``.  ``degree`` defaults to ``n_y // 4``: the top of the
    Chebyshev spectrum is not resolved by the quadrature and is excluded
    from the norm and adjointness measurements.
    """
    degree = degree or grid.n_y // 4
    if degree < 2:
        raise ValueError("resolved subspace needs degree >= 2")
    y = grid.nodes
    t = np.polynomial.chebyshev.chebvander(y, degree - 2)
    v = (1.0 - y**2)[:, None] * t
    sw = np.sqrt(grid.quad_weights)
    q, r = np.linalg.qr(sw[:, None] * v)
    # columns of q are orthonormal in the plain norm; undo the sqrt(w) factor
    out = np.zeros_like(q)
    inner = sw > 0
    out[inner] = q[inner] / sw[inner, None]
    return out


def _weighted_power_norm(matrix, grid, basis, max_iter=200, rtol=1e-10):
    """Power iteration on ``G = B^H B`` with ``B = W^{1/2} M Q``.

    The leading singular values of J_k are tightly clustered, so plain
    iteration stalls; each step squares the (small, compressed) iteration
    matrix instead, i.e. step i applies ``G^(2^i)``.  The estimate is the
    square root of the Rayleigh quotient of ``G``.
    """
    sw = np.sqrt(grid.quad_weights)
    b = sw[:, None] * (matrix @ basis)
    gram = b.conj().T @ b
    top = np.linalg.norm(gram, 1)
    if top == 0.0:
        return 0.0, True, 1
    m = gram.shape[0]
    x0 = np.ones(m, dtype=complex) + 1e-3 * np.arange(m) / m
    a = gram / top
    est = 0.0
    for it in range(1, max_iter + 1):
        x = a @ x0
        nx = np.linalg.norm(x)
        if nx == 0.0:
            return 0.0, True, it
        x /= nx
        new = float(np.sqrt(max((x.conj() @ gram @ x).real, 0.0)))
        if est > 0 and abs(new - est) <= rtol * new:
            return new, True, it
        est = new
        a = a @ a
        a /= np.linalg.norm(a, 1)
    return est, False, max_iter


@dataclass(frozen=True)
class NormEstimate:
    value: float
    converged: bool
    iterations: int

    def __float__(self):
        return self.value


def estimate_operator_norm(op, grid: ChannelGrid | None = None, *, basis=None,
                           max_iter: int = 200, rtol: float = 1e-10) -> NormEstimate:
    """L2 -> L2 norm of an operator on the resolved subspace.

    ``op`` is a :class:`JkOperator` or a plain matrix (then ``grid`` is
    required).  Non-convergence is reported through ``converged``.
    """
    if isinstance(op, JkOperator):
        grid, matrix = op.grid, op.matrix
    else:
        matrix = np.asarray(op)
        if grid is None:
            raise ValueError("grid is required for a plain matrix")
    if basis is None:
        basis = resolved_basis(grid)
    val, ok, it = _weighted_power_norm(matrix, grid, basis, max_iter, rtol)
    return NormEstimate(val, ok, it)


def commutator_matrix(op_matrix, grid: ChannelGrid) -> np.ndarray:
    return grid.d1 @ op_matrix - op_matrix @ grid.d1


def commutator_norm(k: int, grid: ChannelGrid, op: JkOperator | None = None) -> NormEstimate:
    """``||[d_y, J_k]|| / |k|`` on functions vanishing at the walls."""
    op = op or build_jk(k, grid)
    est = estimate_operator_norm(commutator_matrix(op.matrix, grid), grid)
    return NormEstimate(est.value / abs(op.k), est.converged, est.iterations)


def self_adjoint_defect(op: JkOperator, basis=None) -> float:
    """``||C - C^H|| / ||C||`` for the compressed matrix ``C = Q^H W J Q``."""
    if basis is None:
        basis = resolved_basis(op.grid)
    c = basis.conj().T @ (op.grid.quad_weights[:, None] * (op.matrix @ basis))
    nc = np.linalg.norm(c, 2)
    return float(np.linalg.norm(c - c.conj().T, 2) / nc) if nc > 0 else 0.0
