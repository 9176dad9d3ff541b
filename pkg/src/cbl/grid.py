"""Chebyshev-Gauss-Lobatto discretization of the wall-normal interval [-1, 1]."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class ChannelGrid:
    """Collocation grid on [-1, 1].

    Nodes run from ``y[0] = 1`` down to ``y[n_y] = -1``.  ``d1`` and ``d2``
    act on nodal values; ``quad_weights`` are Clenshaw-Curtis weights.
    All arrays are flagged read-only.
    """

    n_y: int
    nodes: np.ndarray = field(repr=False)
    d1: np.ndarray = field(repr=False)
    d2: np.ndarray = field(repr=False)
    quad_weights: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.n_y + 1

    @property
    def interior(self) -> slice:
        return slice(1, self.n_y)

    def integrate(self, f):
        return self.quad_weights @ np.asarray(f)

    def norm(self, f) -> float:
        """L2 norm on [-1, 1] by quadrature."""
        f = np.asarray(f)
        return float(np.sqrt(max(self.quad_weights @ (f.real**2 + f.imag**2), 0.0)))

    def __hash__(self):
        return hash(("ChannelGrid", self.n_y))


def cheb_nodes(n: int) -> np.ndarray:
    y = np.cos(np.pi * np.arange(n + 1) / n)
    # exact endpoints and midpoint; cos() leaves ~1e-17 residue elsewhere
    y[0], y[-1] = 1.0, -1.0
    if n % 2 == 0:
        y[n // 2] = 0.0
    return y


def cheb_diff_matrix(y: np.ndarray) -> np.ndarray:
    """First-derivative collocation matrix on Gauss-Lobatto nodes.

    Off-diagonal entries use the barycentric form; the diagonal is the
    negative row sum so constants are differentiated to zero exactly.
    """
    n = len(y) - 1
    c = np.ones(n + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(n + 1)
    dy = y[:, None] - y[None, :]
    np.fill_diagonal(dy, 1.0)
    d = np.outer(c, 1.0 / c) / dy
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -d.sum(axis=1))
    return d


def clenshaw_curtis_weights(n: int) -> np.ndarray:
    """Clenshaw-Curtis weights for the nodes ``cos(j pi / n)``."""
    theta = np.pi * np.arange(n + 1) / n
    w = np.zeros(n + 1)
    v = np.ones(n - 1)
    inner = slice(1, n)
    if n % 2 == 0:
        w[0] = w[n] = 1.0 / (n**2 - 1)
        for k in range(1, n // 2):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k**2 - 1)
        v -= np.cos(n * theta[inner]) / (n**2 - 1)
    else:
        w[0] = w[n] = 1.0 / n**2
        for k in range(1, (n - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[inner]) / (4 * k**2 - 1)
    w[inner] = 2.0 * v / n
    return w


def make_grid(n_y: int) -> ChannelGrid:
    """Build the grid with ``n_y + 1`` nodes; ``n_y`` must be even and >= 2."""
    if isinstance(n_y, bool) or int(n_y) != n_y:
        raise ValueError(f"n_y must be an integer, got {n_y!r}")
    n_y = int(n_y)
    if n_y < 2 or n_y % 2:
        raise ValueError(f"n_y must be an even integer >= 2, got {n_y}")
    y = cheb_nodes(n_y)
    d1 = cheb_diff_matrix(y)
    d2 = d1 @ d1
    w = clenshaw_curtis_weights(n_y)
    for a in (y, d1, d2, w):
        a.setflags(write=False)
    return ChannelGrid(n_y=n_y, nodes=y, d1=d1, d2=d2, quad_weights=w)


def _check_shape(grid: ChannelGrid, *fs):
    for f in fs:
        if np.shape(f) != (grid.size,):
            raise ValueError(
                f"grid function has shape {np.shape(f)}, expected ({grid.size},)"
            )


def inner_product(grid: ChannelGrid, f, g) -> complex:
    """Discrete L2 inner product ``sum_j w_j f_j conj(g_j)``."""
    _check_shape(grid, f, g)
    return complex(grid.quad_weights @ (np.asarray(f) * np.conj(g)))


def sobolev_h4_norm(grid: ChannelGrid, f) -> float:
    """H^4 norm: square root of the summed squared L2 norms of derivatives 0..4."""
    _check_shape(grid, f)
    total = 0.0
    g = np.asarray(f, dtype=float)
    for _ in range(5):
        total += grid.quad_weights @ (g * g)
        g = grid.d1 @ g
    return float(np.sqrt(max(total, 0.0)))


def barycentric_matrix(nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Matrix evaluating the Lobatto interpolant of nodal data at points ``x``."""
    n = len(nodes) - 1
    bw = (-1.0) ** np.arange(n + 1)
    bw[0] *= 0.5
    bw[-1] *= 0.5
    diff = np.asarray(x, dtype=float)[:, None] - nodes[None, :]
    # points within round-off of a node take the nodal value; this also
    # keeps subnormal differences from overflowing the weights
    exact = np.abs(diff) <= 4 * np.finfo(float).eps
    diff[exact] = 1.0
    m = bw / diff
    m /= m.sum(axis=1, keepdims=True)
    rows = exact.any(axis=1)
    if rows.any():
        m[rows] = exact[rows].astype(float)
    return m
