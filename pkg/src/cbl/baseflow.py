"""Near-Couette base flow driven by a Dirichlet heat flow W(t, y)."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla

from .grid import ChannelGrid, _check_shape, barycentric_matrix, sobolev_h4_norm

DELTA0_DEFAULT = 0.01


class SmallnessWarning(UserWarning):
    """Raised when ||W||_{H^4} exceeds the configured budget delta0."""


def greens_zero(y, yp):
    """Green's function of d_yy on [-1, 1] with Dirichlet walls.

    ``G(y, y') = (y_< + 1)(y_> - 1) / 2`` so that ``d_yy G = delta``.
    """
    y = np.asarray(y, dtype=float)
    yp = np.asarray(yp, dtype=float)
    lo = np.minimum(y, yp)
    hi = np.maximum(y, yp)
    return 0.5 * (lo + 1.0) * (hi - 1.0)


def greens_zero_dy(y, yp):
    """d/dy of :func:`greens_zero`; one-sided average on the diagonal."""
    y = np.asarray(y, dtype=float)
    yp = np.asarray(yp, dtype=float)
    below = 0.5 * (yp - 1.0)  # y < y'
    above = 0.5 * (yp + 1.0)  # y > y'
    return np.where(y < yp, below, np.where(y > yp, above, 0.5 * (below + above)))


def _dirichlet_operator(grid: ChannelGrid) -> np.ndarray:
    return np.array(grid.d2[1:-1, 1:-1])


@dataclass(eq=False)
class HeatEvolver:
    """Exact propagator of the semi-discrete heat equation with W(+-1) = 0.

    The interior block of ``d2`` is exponentiated directly, so any time can
    be reached in one step and the semigroup property holds to round-off.
    """

    grid: ChannelGrid
    mu: float
    operator: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        self.operator = _dirichlet_operator(self.grid)

    @property
    def time_scale(self) -> float:
        return 1.0 / (self.mu * (np.pi / 2) ** 2)

    def propagator(self, t: float) -> np.ndarray:
        return _propagator(self.grid, float(self.mu) * float(t))

    def evolve(self, w, t: float) -> np.ndarray:
        return heat_evolve(w, self.mu, t, self.grid)

    def trajectory(self, w_in, times):
        return [(float(t), self.evolve(w_in, t)) for t in times]


@lru_cache(maxsize=64)
def _propagator(grid: ChannelGrid, mut: float) -> np.ndarray:
    return sla.expm(mut * _dirichlet_operator(grid))


def heat_evolve(w_in, mu: float, t: float, grid: ChannelGrid) -> np.ndarray:
    """W(t) for ``W_t = mu W_yy``, ``W(+-1) = 0``, starting from ``w_in``."""
    _check_shape(grid, w_in)
    w_in = np.asarray(w_in, dtype=float)
    scale = max(1.0, np.max(np.abs(w_in)))
    if abs(w_in[0]) > 1e-12 * scale or abs(w_in[-1]) > 1e-12 * scale:
        raise ValueError("heat_evolve: initial data must vanish at y = +-1")
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    out = np.zeros_like(w_in)
    if t == 0:
        out[1:-1] = w_in[1:-1]
        return out
    out[1:-1] = _propagator(grid, mu * t) @ w_in[1:-1]
    return out


@dataclass(frozen=True, eq=False)
class BaseFlow:
    """Snapshot of the shear profile U and its derivatives on the grid."""

    t: float
    w: np.ndarray = field(repr=False)
    u: np.ndarray = field(repr=False)
    u1: np.ndarray = field(repr=False)
    u2: np.ndarray = field(repr=False)
    u3: np.ndarray = field(repr=False)
    delta0_budget: float
    grid: ChannelGrid = field(repr=False)
    u_green: np.ndarray = field(repr=False, default=None)

    @property
    def h4_norm(self) -> float:
        return sobolev_h4_norm(self.grid, self.w)

    @property
    def max_abs_u(self) -> float:
        return float(np.max(np.abs(self.u)))


def _u_from_green(grid: ChannelGrid, w: np.ndarray, order: int | None = None) -> np.ndarray:
    """y + d_y int G(y, y') W(y') dy', integrated piecewise around each node."""
    y = grid.nodes
    order = order or grid.n_y // 2 + 16
    xg, wg = np.polynomial.legendre.leggauss(order)
    out = np.empty_like(y)
    for i, yi in enumerate(y):
        acc = 0.0
        for lo, hi in ((-1.0, yi), (yi, 1.0)):
            if hi <= lo:
                continue
            half = 0.5 * (hi - lo)
            pts = lo + half * (xg + 1.0)
            wint = barycentric_matrix(y, pts) @ w
            # on each piece d_y G is affine in y' with no kink inside
            dg = 0.5 * (pts + 1.0) if lo < yi else 0.5 * (pts - 1.0)
            acc += half * (wg @ (dg * wint))
        out[i] = yi + acc
    return out


def _u_from_poisson(grid: ChannelGrid, w: np.ndarray) -> np.ndarray:
    """y + Phi' with Phi'' = W, Phi(+-1) = 0 solved by collocation."""
    phi = np.zeros_like(w)
    phi[1:-1] = np.linalg.solve(grid.d2[1:-1, 1:-1], w[1:-1])
    return grid.nodes + grid.d1 @ phi


def shear_profile(grid: ChannelGrid, w) -> tuple[np.ndarray, np.ndarray]:
    """``(U, U'')`` from W by collocation only; the cheap path for time stepping."""
    w = np.asarray(w, dtype=float)
    return _u_from_poisson(grid, w), grid.d1 @ w


def assemble_base_flow(
    w, t: float, grid: ChannelGrid, delta0: float = DELTA0_DEFAULT
) -> BaseFlow:
    """Build U, U', U'', U''' from W.

    U is computed by collocation (``U = y + Phi'``, ``Phi'' = W``) and,
    independently, by quadrature against the closed-form Green's function;
    the quadrature value is kept on ``u_green`` for cross-checks.
    U' is set to ``1 + W`` exactly.
    """
    _check_shape(grid, w)
    w = np.array(w, dtype=float)
    scale = max(1.0, np.max(np.abs(w)))
    if abs(w[0]) > 1e-10 * scale or abs(w[-1]) > 1e-10 * scale:
        raise ValueError("assemble_base_flow: W must vanish at y = +-1")
    w[0] = w[-1] = 0.0
    if not delta0 > 0:
        raise ValueError(f"delta0 must be positive, got {delta0}")
    h4 = sobolev_h4_norm(grid, w)
    if h4 > delta0:
        warnings.warn(
            f"||W||_H4 = {h4:.4g} exceeds delta0 = {delta0:.4g}; "
            "smallness hypothesis violated, decay guarantees do not apply",
            SmallnessWarning,
            stacklevel=2,
        )
    u = _u_from_poisson(grid, w)
    u_green = _u_from_green(grid, w)
    u1 = 1.0 + w
    u2 = grid.d1 @ w
    u3 = grid.d2 @ w
    for a in (w, u, u1, u2, u3, u_green):
        a.setflags(write=False)
    return BaseFlow(
        t=float(t), w=w, u=u, u1=u1, u2=u2, u3=u3,
        delta0_budget=float(delta0), grid=grid, u_green=u_green,
    )


def couette(grid: ChannelGrid, delta0: float = DELTA0_DEFAULT) -> BaseFlow:
    return assemble_base_flow(np.zeros(grid.size), 0.0, grid, delta0)


def check_w_estimate(w_trajectory, delta0: float, grid: ChannelGrid) -> dict:
    """Audit ||W(t)||_{H^4} along a heat-flow trajectory.

    Parameters
    ----------
    w_trajectory : sequence of (t, W) pairs, times increasing
    delta0 : smallness budget

    Returns a dict with the norm ratios against the initial norm, whether
    they are non-increasing (1e-10 slack), whether the budget holds, and the
    squared-initial-norm variant of the bound for the record.
    """
    norms = np.array([sobolev_h4_norm(grid, w) for _, w in w_trajectory])
    times = [float(t) for t, _ in w_trajectory]
    n0 = norms[0] if len(norms) else 0.0
    if n0 == 0.0:
        ratios = np.zeros_like(norms)
    else:
        ratios = norms / n0
    nonincreasing = bool(np.all(np.diff(ratios) <= 1e-10))
    within = bool(n0 > delta0 or np.all(norms <= delta0 * (1 + 1e-12)))
    return {
        "times": times,
        "h4_norms": norms.tolist(),
        "ratios": ratios.tolist(),
        "max_ratio": float(ratios.max()) if len(ratios) else 0.0,
        "nonincreasing": nonincreasing,
        "within_budget": within,
        "squared_bound": float(n0**2),
        "squared_bound_holds": bool(np.all(norms <= n0**2 * (1 + 1e-12))),
        "passed": nonincreasing and within,
    }


def sine_correction(grid: ChannelGrid, h4_norm: float) -> np.ndarray:
    """``W = c sin(pi (y + 1))`` scaled so that ``||W||_H4 = h4_norm``."""
    w = np.sin(np.pi * (grid.nodes + 1.0))
    w[0] = w[-1] = 0.0
    return w * (h4_norm / sobolev_h4_norm(grid, w)) if h4_norm > 0 else np.zeros(grid.size)
