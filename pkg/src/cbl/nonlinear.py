"""Pseudo-spectral solver for the full perturbation system with sigma = 1.

Fourier in x (modes k = 0..K, negative modes implied by reality) and
Chebyshev collocation in y.  Unknowns are the perturbation vorticity and
temperature about a shear flow U(y):

    d_t omega + U d_x omega - U'' d_x psi + u.grad omega = mu Lap omega - d_x theta
    d_t theta + U d_x theta + u.grad theta = nu Lap theta
    Lap psi = omega,   u = (d_y psi, -d_x psi)

The advection term is formed in physical space on a grid padded by 3/2 in
both directions and projected back; :func:`advection_direct` evaluates the
same term by explicit convolution for testing.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
import scipy.linalg as sla

from .baseflow import BaseFlow
from .energy import EnergyBreakdown, FunctionalConstants, aggregate_script_energies
from .grid import ChannelGrid, make_grid
from .linear import CFL_LIMIT, GAMMA, CFLError, LinearStepper, NonFiniteStateError, ShearProfile
from .poisson import poisson_solver

log = logging.getLogger(__name__)

MAGIC = b"CBLB"
VERSION = 1
_HEADER = struct.Struct("<4sIqqddd")


@dataclass(eq=False)
class FlowField:
    """Fourier-Chebyshev coefficients ``omega[k], theta[k]`` for ``k = 0..K``."""

    grid: ChannelGrid
    omega: np.ndarray
    theta: np.ndarray
    t: float = 0.0
    _psi: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.omega = np.array(self.omega, dtype=complex)
        self.theta = np.array(self.theta, dtype=complex)
        if self.omega.ndim != 2 or self.omega.shape[1] != self.grid.size:
            raise ValueError(f"omega has shape {self.omega.shape}, expected (K+1, {self.grid.size})")
        if self.theta.shape != self.omega.shape:
            raise ValueError("omega and theta shapes differ")

    @classmethod
    def zeros(cls, K: int, grid: ChannelGrid) -> "FlowField":
        z = np.zeros((K + 1, grid.size), dtype=complex)
        return cls(grid, z, z.copy())

    @property
    def K(self) -> int:
        return self.omega.shape[0] - 1

    def copy(self) -> "FlowField":
        return FlowField(self.grid, self.omega.copy(), self.theta.copy(), self.t)

    def invalidate(self):
        self._psi = None

    @property
    def psi(self) -> np.ndarray:
        if self._psi is None:
            self._psi = stream_function(self.omega, self.grid)
        return self._psi

    def enforce_invariants(self):
        """Zero the wall values and drop the imaginary part of the mean mode."""
        for a in (self.omega, self.theta):
            a[:, 0] = 0.0
            a[:, -1] = 0.0
            a[0] = a[0].real
        self.invalidate()

    def invariant_defects(self) -> dict:
        return {
            "wall": float(max(np.abs(self.omega[:, [0, -1]]).max(), np.abs(self.theta[:, [0, -1]]).max())),
            "mean_imag": float(max(np.abs(self.omega[0].imag).max(), np.abs(self.theta[0].imag).max())),
        }


def stream_function(omega: np.ndarray, grid: ChannelGrid) -> np.ndarray:
    """Solve ``(d_yy - k^2) psi_k = omega_k`` with ``psi_k(+-1) = 0`` for every k."""
    psi = np.zeros_like(omega, dtype=complex)
    psi[0, 1:-1] = sla.lu_solve(_mean_mode_lu(grid), omega[0, 1:-1])
    for k in range(1, omega.shape[0]):
        psi[k] = poisson_solver(k, grid).solve(omega[k])
    return psi


@lru_cache(maxsize=16)
def _mean_mode_lu(grid: ChannelGrid):
    return sla.lu_factor(np.array(grid.d2[1:-1, 1:-1]))


# --- transforms -----------------------------------------------------------

def cheb_coeffs(values: np.ndarray, axis: int = -1) -> np.ndarray:
    """Chebyshev coefficients from values at ``cos(j pi / n)`` (DCT-I)."""
    n = values.shape[axis] - 1
    c = sfft.dct(values, type=1, axis=axis) / n
    idx = [slice(None)] * values.ndim
    idx[axis] = 0
    c[tuple(idx)] *= 0.5
    idx[axis] = n
    c[tuple(idx)] *= 0.5
    return c


def cheb_values(coeffs: np.ndarray, axis: int = -1) -> np.ndarray:
    """Inverse of :func:`cheb_coeffs`."""
    n = coeffs.shape[axis] - 1
    c = coeffs.copy()
    idx = [slice(None)] * c.ndim
    for j in (0, n):
        idx[axis] = j
        c[tuple(idx)] *= 2.0
    return sfft.idct(c, type=1, axis=axis) * n


def _pad_y(values: np.ndarray, m: int) -> np.ndarray:
    c = cheb_coeffs(values)
    out = np.zeros(values.shape[:-1] + (m + 1,), dtype=c.dtype)
    out[..., : c.shape[-1]] = c
    return cheb_values(out)


def _unpad_y(values: np.ndarray, n: int) -> np.ndarray:
    c = cheb_coeffs(values)[..., : n + 1]
    return cheb_values(c)


def _to_physical_x(modes: np.ndarray, nx: int, axis: int = 0) -> np.ndarray:
    """Real field on ``nx`` equispaced x-points from modes ``0..K`` along ``axis``."""
    modes = np.moveaxis(modes, axis, 0)
    spec = np.zeros((nx // 2 + 1,) + modes.shape[1:], dtype=complex)
    spec[: modes.shape[0]] = modes
    return np.moveaxis(sfft.irfft(spec, n=nx, axis=0) * nx, 0, axis)


def _to_modes_x(phys: np.ndarray, K: int, axis: int = 0) -> np.ndarray:
    nx = phys.shape[axis]
    out = np.moveaxis(sfft.rfft(phys, axis=axis), axis, 0)[: K + 1] / nx
    return np.moveaxis(out, 0, axis)


def padded_sizes(K: int, n_y: int, pad_y: bool = True) -> tuple[int, int]:
    """x-points for alias-free quadratic products and padded Chebyshev degree."""
    nx = 3 * K + 2
    nx += nx % 2
    m = (3 * n_y) // 2 if pad_y else n_y
    return max(nx, 2), m


# --- advection -------------------------------------------------------------

def advection(field_: FlowField, target: str = "omega", pad_y: bool = True) -> np.ndarray:
    """Fourier coefficients ``k = 0..K`` of ``u . grad f`` for ``f`` = omega or theta."""
    f = getattr(field_, target)
    return _advection_arrays(field_.psi, f, field_.grid, pad_y)


def _advection_arrays(psi, f, grid, pad_y=True):
    return _advection_many(psi, [f], grid, pad_y)[0]


def _advection_many(psi, fields, grid, pad_y=True):
    """``u . grad f`` for each ``f`` in ``fields``, sharing the velocity transforms."""
    K = psi.shape[0] - 1
    if K == 0:
        return [np.zeros_like(f) for f in fields]
    ik = 1j * np.arange(K + 1)[:, None]
    d1t = grid.d1.T
    parts = [psi @ d1t, ik * psi]
    for f in fields:
        parts += [ik * f, f @ d1t]
    stack = np.stack(parts)
    nx, m = padded_sizes(K, grid.n_y, pad_y)
    if pad_y:
        stack = _pad_y(stack, m)
    phys = _to_physical_x(stack, nx, axis=1)
    a, b = phys[0], phys[1]
    prods = np.stack([a * phys[2 + 2 * i] - b * phys[3 + 2 * i] for i in range(len(fields))])
    out = _to_modes_x(prods, K, axis=1)
    if pad_y:
        out = _unpad_y(out, grid.n_y)
    return list(out)


def advection_mode(field_: FlowField, k: int, target: str = "omega") -> np.ndarray:
    if not 0 <= k <= field_.K:
        raise ValueError(f"mode {k} outside 0..{field_.K}")
    return advection(field_, target)[k]


def advection_direct(field_: FlowField, k: int, target: str = "omega") -> np.ndarray:
    """Convolution sum over retained modes, evaluated at the collocation nodes.

    ``sum_l [d_y psi_{k-l} i l f_l - i (k-l) psi_{k-l} d_y f_l]`` with
    ``g_{-j} = conj(g_j)``; products are pointwise on the Lobatto grid.
    """
    psi = field_.psi
    f = getattr(field_, target)
    d1 = field_.grid.d1
    K = field_.K

    def coef(arr, j):
        if abs(j) > K:
            return None
        return arr[j] if j >= 0 else np.conj(arr[-j])

    out = np.zeros(field_.grid.size, dtype=complex)
    for l in range(-K, K + 1):
        p = coef(psi, k - l)
        g = coef(f, l)
        if p is None or g is None:
            continue
        out += (d1 @ p) * (1j * l * g) - 1j * (k - l) * p * (d1 @ g)
    return out


# --- time stepping -----------------------------------------------------------

@dataclass
class NonlinearRun:
    """Parameters of a nonlinear run; ``lam`` is always ``min(mu, nu)``."""

    mu: float
    nu: float
    dt: float
    T: float
    constants: FunctionalConstants = field(default_factory=FunctionalConstants)
    sample_every: int = 10
    pad_y: bool = True
    policy: str = "frozen"
    growth_limit: float = 10.0
    nonlinear: bool = True

    def __post_init__(self):
        if not (self.mu > 0 and self.nu > 0):
            raise ValueError("mu and nu must be positive")
        if not (self.dt > 0 and self.T > 0):
            raise ValueError("dt and T must be positive")

    @property
    def lam(self) -> float:
        return min(self.mu, self.nu)

    @property
    def delta1(self) -> float:
        return self.constants.delta1

    @property
    def m(self) -> float:
        return self.constants.m


def default_run(mu: float, nu: float, K: int, base_flow: BaseFlow, amplitude_u: float = 0.0,
                horizon: float = 2.0, **kw) -> NonlinearRun:
    """Run with ``T = horizon * lam^(-1/3)`` and ``dt = min(CFL, 0.05 lam^(1/3))``."""
    lam = min(mu, nu)
    cfl = CFL_LIMIT / max(K * base_flow.max_abs_u + amplitude_u * max(K, base_flow.grid.n_y**2 / 2), 1e-300)
    dt = min(0.9 * cfl, 0.05 * lam ** (1 / 3))
    T = horizon * lam ** (-1 / 3)
    n = int(np.ceil(T / dt))
    return NonlinearRun(mu=mu, nu=nu, dt=T / n, T=T, **kw)


def max_velocity(field_: FlowField) -> tuple[float, float]:
    """``(max|u_x|, max|u_y|)`` over the Lobatto grid and 2K+2 x-points."""
    K = field_.K
    psi = field_.psi
    nx = max(2 * K + 2, 2)
    ik = 1j * np.arange(K + 1)[:, None]
    u = _to_physical_x(psi @ field_.grid.d1.T, nx)
    v = _to_physical_x(-ik * psi, nx)
    return float(np.abs(u).max()), float(np.abs(v).max())


class NonlinearStepper:
    """One ARS(2,2,2) step for all modes, sharing the per-mode linear stepper."""

    def __init__(self, grid: ChannelGrid, K: int, run: NonlinearRun, base_flow: BaseFlow):
        self.grid, self.K, self.run = grid, K, run
        self.profile = ShearProfile(base_flow, run.mu, run.policy)
        self.base_flow = base_flow
        self.steppers = [LinearStepper(grid, k, 1, run.mu, run.nu, run.dt) for k in range(K + 1)]
        self.solvers = [None] + [poisson_solver(k, grid) for k in range(1, K + 1)]

    def explicit(self, omega, theta, t):
        grid = self.grid
        u, u2 = self.profile.at(t)
        psi = stream_function(omega, grid)
        ks = np.arange(self.K + 1)[:, None]
        ik = 1j * ks
        nw = -ik * u * omega + ik * u2 * psi - ik * theta
        nt = -ik * u * theta
        if self.run.nonlinear and self.K > 0:
            aw, at = _advection_many(psi, [omega, theta], grid, self.run.pad_y)
            nw = nw - aw
            nt = nt - at
        return nw, nt

    def step(self, field_: FlowField) -> FlowField:
        dt = self.run.dt
        t = field_.t
        if not (np.all(np.isfinite(field_.omega)) and np.all(np.isfinite(field_.theta))):
            raise NonFiniteStateError(f"non-finite input state at t = {t:.6g}")
        check_cfl_nonlinear(field_, self.base_flow, dt)
        n1w, n1t = self.explicit(field_.omega, field_.theta, t)
        w1 = np.empty_like(field_.omega)
        t1 = np.empty_like(field_.theta)
        for k, st in enumerate(self.steppers):
            w1[k], t1[k] = st.stage1(field_.omega[k], field_.theta[k], n1w[k], n1t[k])
        n2w, n2t = self.explicit(w1, t1, t + GAMMA * dt)
        w2 = np.empty_like(w1)
        t2 = np.empty_like(t1)
        for k, st in enumerate(self.steppers):
            w2[k], t2[k] = st.stage2(
                field_.omega[k], field_.theta[k], w1[k], t1[k], n1w[k], n1t[k], n2w[k], n2t[k]
            )
        out = FlowField(self.grid, w2, t2, t + dt)
        if not (np.all(np.isfinite(w2)) and np.all(np.isfinite(t2))):
            raise NonFiniteStateError(f"non-finite state after step at t = {t:.6g}")
        out.enforce_invariants()
        return out


def check_cfl_nonlinear(field_: FlowField, base_flow: BaseFlow, dt: float) -> float:
    """Advective CFL number; raises :class:`CFLError` above the limit.

    ``dt (K max|U + u_x| + max|u_y| n_y^2 / 2)``.
    """
    K = field_.K
    ux, uy = max_velocity(field_) if np.any(field_.omega) else (0.0, 0.0)
    # streamwise speed meets the x-resolution, wall-normal speed the
    # clustered Chebyshev spacing ~ 2 / n_y^2
    c = dt * (K * (base_flow.max_abs_u + ux) + uy * field_.grid.n_y**2 / 2)
    if c > CFL_LIMIT:
        raise CFLError(f"advective CFL number {c:.3g} exceeds {CFL_LIMIT}")
    return c


def nonlinear_step(field_: FlowField, run: NonlinearRun, base_flow: BaseFlow,
                   stepper: NonlinearStepper | None = None) -> FlowField:
    stepper = stepper or NonlinearStepper(field_.grid, field_.K, run, base_flow)
    return stepper.step(field_)


@dataclass
class RunResult:
    """Diagnostics of :func:`run_nonlinear`."""

    records: list
    final: FlowField
    classification: str
    last_good: FlowField | None = None
    error: str | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)


def classify(records: list, limit: float = 10.0) -> str:
    """``"stable"`` if both aggregate energies stay within ``limit`` times their start."""
    if not records:
        return "unknown"
    e_t0 = records[0].script_e_theta
    e_w0 = records[0].script_e_omega
    for r in records:
        if not (np.isfinite(r.script_e_theta) and np.isfinite(r.script_e_omega)):
            return "unstable"
        if r.script_e_theta > limit * e_t0 or r.script_e_omega > limit * e_w0:
            return "unstable"
    return "stable"


def run_nonlinear(field0: FlowField, run: NonlinearRun, base_flow: BaseFlow,
                  callback=None, jk_ops: dict | None = None) -> RunResult:
    """Integrate to ``run.T``, recording :class:`EnergyBreakdown` every ``sample_every`` steps.

    Blow-up (non-finite values or a CFL violation) ends the run early and is
    classified unstable; the last finite field is kept on ``last_good``.
    """
    grid = field0.grid
    stepper = NonlinearStepper(grid, field0.K, run, base_flow)
    jk_ops = {} if jk_ops is None else jk_ops
    n_steps = int(round(run.T / run.dt))
    f = field0.copy()
    f.enforce_invariants()

    def sample(fl):
        rec = aggregate_script_energies(fl, fl.t, run.mu, run.nu, run.constants, jk_ops)
        if callback is not None:
            callback(rec, fl)
        return rec

    records = [sample(f)]
    error = None
    for i in range(1, n_steps + 1):
        try:
            f_new = stepper.step(f)
        except (NonFiniteStateError, CFLError) as exc:
            error = str(exc)
            log.warning("run stopped at t=%.4g: %s", f.t, exc)
            break
        f = f_new
        if i % run.sample_every == 0 or i == n_steps:
            records.append(sample(f))
            last = records[-1]
            if last.script_e_theta > 1e6 * max(records[0].script_e_theta, 1e-300) and \
                    last.script_e_omega > 1e6 * max(records[0].script_e_omega, 1e-300):
                error = "energy grew by more than 1e6"
                break
    cls = "unstable" if error else classify(records, run.growth_limit)
    return RunResult(records, f, cls, last_good=f, error=error)


def envelope_rate(result: RunResult, t_lo: float = 0.0) -> float:
    """Decay rate of the nonzero-mode norm from the unweighted energy sum.

    The energy decays at twice the norm rate, so half the fitted energy rate
    is returned for comparison with ``delta1 * lam^(1/3)``.
    """
    t = result.times
    e = np.array([r.nonzero_energy for r in result.records])
    mask = (t >= t_lo) & (e > 0)
    if mask.sum() < 2:
        raise ValueError("not enough positive samples to fit the envelope")
    return float(-0.5 * np.polyfit(t[mask], np.log(e[mask]), 1)[0])


# --- initial data --------------------------------------------------------------

def anisotropic_norm(modes: np.ndarray, coeff: float, m: float, grid: ChannelGrid) -> float:
    """``sum_{j<=1} ||(coeff^(1/3) d_y)^j <d_x>^(m - j/3) f||`` over the periodic channel.

    ``<k> = (1 + k^2)^(1/2)``; the x-integral over ``[0, 2 pi)`` contributes
    ``2 pi`` and each ``k > 0`` is counted twice for its conjugate.
    """
    total = 0.0
    ks = np.arange(modes.shape[0])
    mult = np.where(ks == 0, 1.0, 2.0)
    bracket = np.sqrt(1.0 + ks.astype(float) ** 2)
    for j in (0, 1):
        g = modes if j == 0 else modes @ grid.d1.T
        w = (coeff ** (1 / 3)) ** j * bracket ** (m - j / 3)
        sq = np.array([grid.norm(g[k]) ** 2 for k in range(len(ks))])
        total += np.sqrt(2 * np.pi * np.sum(mult * w**2 * sq))
    return float(total)


def budget_initial_data(K: int, grid: ChannelGrid, mu: float, nu: float,
                         eps0: float = 0.01, eps1: float = 0.01, m: float = 1.0,
                         n_modes: int = 4, scale: float = 1.0) -> FlowField:
    """Profile ``sum_{k<=n_modes} k^(-m) sin(pi(y+1)) cos(kx)`` at the data budget.

    omega is normalized to ``eps0 min(mu, nu)^(1/2)`` and theta to
    ``eps1 min(mu, nu)``, each measured in :func:`anisotropic_norm`; the
    result is then multiplied by ``scale``.
    """
    if K < n_modes:
        raise ValueError(f"K = {K} cannot hold {n_modes} modes")
    y = grid.nodes
    prof = np.sin(np.pi * (y + 1))
    modes = np.zeros((K + 1, grid.size), dtype=complex)
    for k in range(1, n_modes + 1):
        modes[k] = 0.5 * k ** (-m) * prof
    lam = min(mu, nu)
    om = modes * (eps0 * np.sqrt(lam) / anisotropic_norm(modes, mu, m, grid))
    th = modes * (eps1 * lam / anisotropic_norm(modes, nu, m, grid))
    f = FlowField(grid, scale * om, scale * th)
    f.enforce_invariants()
    return f


# --- checkpoints ------------------------------------------------------------------

def write_checkpoint(path, field_: FlowField, mu: float, nu: float) -> None:
    """Little-endian header then row-major complex128 omega and theta blocks."""
    header = _HEADER.pack(MAGIC, VERSION, field_.K, field_.grid.n_y, float(mu), float(nu), float(field_.t))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(field_.omega, dtype="<c16").tobytes())
        fh.write(np.ascontiguousarray(field_.theta, dtype="<c16").tobytes())


def read_checkpoint(path, grid: ChannelGrid | None = None):
    """Return ``(field, mu, nu)``; the grid is rebuilt from ``n_y`` if not given."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ValueError("checkpoint truncated")
    magic, version, K, n_y, mu, nu, t = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"bad checkpoint magic {magic!r}")
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    count = (K + 1) * (n_y + 1)
    need = _HEADER.size + 2 * count * 16
    if len(raw) != need:
        raise ValueError(f"checkpoint has {len(raw)} bytes, expected {need}")
    body = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size)
    omega = body[:count].reshape(K + 1, n_y + 1).astype(complex)
    theta = body[count:].reshape(K + 1, n_y + 1).astype(complex)
    if grid is None or grid.n_y != n_y:
        grid = make_grid(int(n_y))
    return FlowField(grid, omega, theta, t), mu, nu


__all__ = [
    "EnergyBreakdown", "FlowField", "NonlinearRun", "NonlinearStepper", "RunResult",
    "advection", "advection_direct", "advection_mode", "anisotropic_norm", "classify",
    "default_run", "envelope_rate", "nonlinear_step", "read_checkpoint", "run_nonlinear",
    "stream_function", "budget_initial_data", "write_checkpoint",
]
