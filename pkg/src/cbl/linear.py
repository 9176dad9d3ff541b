"""Per-mode linearized evolution of (omega_k, theta_k) about a shear flow U(y).

    d_t omega = -ik U omega + ik U'' psi + mu(-sigma k^2 + d_yy) omega - ik theta
    d_t theta = -ik U theta + nu(-sigma k^2 + d_yy) theta
    (d_yy - k^2) psi = omega,   omega = theta = psi = 0 at y = +-1

Time stepping is the two-stage, second-order IMEX scheme ARS(2,2,2):
diffusion implicit, everything else explicit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .baseflow import BaseFlow, _propagator, shear_profile
from .energy import (
    FunctionalConstants,
    dissipation_components,
    energy_omega_k,
    energy_theta_k,
)
from .grid import ChannelGrid
from .jk import build_jk
from .poisson import poisson_solver

GAMMA = 1.0 - 1.0 / np.sqrt(2.0)
DELTA = 1.0 - 1.0 / (2.0 * GAMMA)
CFL_LIMIT = 0.5


class CFLError(ValueError):
    """Time step too large for the explicit advection."""


class NonFiniteStateError(ArithmeticError):
    """The state picked up NaN or inf during a step."""


def resolution_floor(nu: float) -> float:
    """Smallest admissible ``n_y`` for a ``sigma = 0`` run at viscosity ``nu``."""
    return 4.0 * nu ** (-0.25)


@dataclass
class ModeState:
    t: float
    omega: np.ndarray
    theta: np.ndarray

    def copy(self) -> "ModeState":
        return ModeState(self.t, self.omega.copy(), self.theta.copy())


@dataclass(eq=False)
class LinearModeProblem:
    """One Fourier mode of the linearized system.

    ``policy`` is ``"frozen"`` (U fixed at the base-flow snapshot) or
    ``"coevolving"`` (W follows the Dirichlet heat flow with viscosity mu).
    """

    k: int
    sigma: int
    mu: float
    nu: float
    base_flow: BaseFlow
    omega0: np.ndarray
    theta0: np.ndarray
    policy: str = "frozen"
    theta_equation: bool = True
    check_resolution: bool = True

    def __post_init__(self):
        if self.k == 0:
            raise ValueError("linear mode problems need k != 0")
        if self.sigma not in (0, 1):
            raise ValueError(f"sigma must be 0 or 1, got {self.sigma}")
        if not (self.mu > 0 and self.nu > 0):
            raise ValueError("mu and nu must be positive")
        if self.policy not in ("frozen", "coevolving"):
            raise ValueError(f"unknown base-flow policy {self.policy!r}")
        g = self.grid
        if self.check_resolution and self.sigma == 0:
            floor = resolution_floor(min(self.mu, self.nu))
            if g.n_y < floor:
                raise ValueError(
                    f"n_y = {g.n_y} below the boundary-layer floor {floor:.1f} "
                    f"for viscosity {min(self.mu, self.nu):g}"
                )
        self.omega0 = _pinned(self.omega0, g)
        self.theta0 = _pinned(self.theta0, g)

    @property
    def grid(self) -> ChannelGrid:
        return self.base_flow.grid

    def initial_state(self) -> ModeState:
        return ModeState(0.0, self.omega0.copy(), self.theta0.copy())


def _pinned(f, grid):
    f = np.array(f, dtype=complex)
    if f.shape != (grid.size,):
        raise ValueError(f"mode data has shape {f.shape}, expected ({grid.size},)")
    f[0] = f[-1] = 0.0
    return f


class ShearProfile:
    """U and U'' at arbitrary times.

    ``policy="frozen"`` keeps the snapshot; ``"coevolving"`` moves W along
    the Dirichlet heat flow with viscosity ``mu``.
    """

    def __init__(self, base_flow: BaseFlow, mu: float, policy: str = "frozen"):
        self.base_flow, self.mu, self.policy = base_flow, float(mu), policy
        self._frozen = (np.asarray(base_flow.u), np.asarray(base_flow.u2))
        self._cache = {}

    def at(self, t):
        if self.policy == "frozen":
            return self._frozen
        key = float(t)
        hit = self._cache.get(key)
        if hit is None:
            bf = self.base_flow
            grid = bf.grid
            w = np.array(bf.w, dtype=float)
            lag = key - bf.t
            if lag > 0:
                w[1:-1] = _propagator(grid, self.mu * lag) @ w[1:-1]
            hit = shear_profile(grid, w)
            if len(self._cache) > 8:
                self._cache.clear()
            self._cache[key] = hit
        return hit


class LinearStepper:
    """ARS(2,2,2) stepper with a fixed step size.

    The implicit matrices ``I - gamma dt L`` are factored once.  The
    nonlinear solver reuses :meth:`step_arrays` with its own explicit term.
    """

    def __init__(self, grid: ChannelGrid, k: int, sigma: int, mu: float, nu: float, dt: float):
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        self.grid, self.k, self.dt = grid, int(k), float(dt)
        inner = np.array(grid.d2[1:-1, 1:-1])
        shift = sigma * k**2
        eye = np.eye(grid.size - 2)
        self.l_omega = mu * (inner - shift * eye)
        self.l_theta = nu * (inner - shift * eye)
        self.lu_omega = sla.lu_factor(eye - GAMMA * dt * self.l_omega)
        self.lu_theta = sla.lu_factor(eye - GAMMA * dt * self.l_theta)

    def _solve(self, lu, rhs):
        out = np.zeros(self.grid.size, dtype=complex)
        out[1:-1] = sla.lu_solve(lu, rhs)
        return out

    def stage1(self, omega, theta, n1w, n1t):
        dt = self.dt
        w1 = self._solve(self.lu_omega, omega[1:-1] + GAMMA * dt * n1w[1:-1])
        t1 = self._solve(self.lu_theta, theta[1:-1] + GAMMA * dt * n1t[1:-1])
        return w1, t1

    def stage2(self, omega, theta, w1, t1, n1w, n1t, n2w, n2t):
        dt = self.dt
        rw = (
            omega[1:-1]
            + dt * (DELTA * n1w[1:-1] + (1 - DELTA) * n2w[1:-1])
            + dt * (1 - GAMMA) * (self.l_omega @ w1[1:-1])
        )
        rt = (
            theta[1:-1]
            + dt * (DELTA * n1t[1:-1] + (1 - DELTA) * n2t[1:-1])
            + dt * (1 - GAMMA) * (self.l_theta @ t1[1:-1])
        )
        return self._solve(self.lu_omega, rw), self._solve(self.lu_theta, rt)

    def step_arrays(self, omega, theta, explicit, t):
        """Advance one step; ``explicit(omega, theta, t)`` returns full-grid RHS pairs."""
        n1w, n1t = explicit(omega, theta, t)
        w1, t1 = self.stage1(omega, theta, n1w, n1t)
        n2w, n2t = explicit(w1, t1, t + GAMMA * self.dt)
        return self.stage2(omega, theta, w1, t1, n1w, n1t, n2w, n2t)


def check_cfl(k: int, max_u: float, dt: float) -> None:
    c = dt * abs(k) * max_u
    if c > CFL_LIMIT:
        raise CFLError(f"dt*|k|*max|U| = {c:.3g} exceeds {CFL_LIMIT}")


def _explicit_term(problem: LinearModeProblem, profile: ShearProfile):
    k = problem.k
    solver = poisson_solver(k, problem.grid)

    def rhs(omega, theta, t):
        u, u2 = profile.at(t)
        psi = solver.solve(omega)
        nw = -1j * k * u * omega + 1j * k * u2 * psi
        if problem.theta_equation:
            nw = nw - 1j * k * theta
            nt = -1j * k * u * theta
        else:
            nt = np.zeros_like(theta)
        return nw, nt

    return rhs


def linear_step(problem: LinearModeProblem, state: ModeState, dt: float,
                stepper: LinearStepper | None = None) -> ModeState:
    """Advance ``state`` by one IMEX step of size ``dt``."""
    if not (np.all(np.isfinite(state.omega)) and np.all(np.isfinite(state.theta))):
        raise NonFiniteStateError(f"non-finite input state at t = {state.t:.6g}")
    check_cfl(problem.k, problem.base_flow.max_abs_u, dt)
    stepper = stepper or LinearStepper(
        problem.grid, problem.k, problem.sigma, problem.mu, problem.nu, dt
    )
    if abs(stepper.dt - dt) > 1e-15 * dt:
        raise ValueError("stepper was built for a different dt")
    profile = getattr(problem, "_profile", None) or ShearProfile(
        problem.base_flow, problem.mu, problem.policy
    )
    w, th = stepper.step_arrays(state.omega, state.theta, _explicit_term(problem, profile), state.t)
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(th))):
        raise NonFiniteStateError(
            f"non-finite state after step at t = {state.t:.6g} (k={problem.k}, dt={dt:g})"
        )
    if not problem.theta_equation:
        th = state.theta.copy()
    return ModeState(state.t + dt, w, th)


@dataclass
class ModeTrajectory:
    """Sampled diagnostics of a single-mode run."""

    k: int
    times: list = field(default_factory=list)
    theta_norm: list = field(default_factory=list)
    dtheta_norm: list = field(default_factory=list)
    omega_norm: list = field(default_factory=list)
    domega_norm: list = field(default_factory=list)
    e_theta: list = field(default_factory=list)
    e_omega: list = field(default_factory=list)
    dis_theta: list = field(default_factory=list)
    dis_omega: list = field(default_factory=list)
    theta_sq_integral: list = field(default_factory=list)
    final_state: ModeState | None = None
    nu: float = 0.0
    mu: float = 0.0

    def array(self, name: str) -> np.ndarray:
        if name == "theta_energy":
            # ||theta||^2 + nu^(2/3)|k|^(-2/3) ||d_y theta||^2
            a = np.asarray(self.theta_norm) ** 2
            b = np.asarray(self.dtheta_norm) ** 2
            return a + self.nu ** (2 / 3) * abs(self.k) ** (-2 / 3) * b
        return np.asarray(getattr(self, name), dtype=float)


def evolve_mode(
    problem: LinearModeProblem,
    T: float,
    dt: float,
    sample_every: int = 1,
    constants: FunctionalConstants | None = None,
    energies: bool = True,
) -> ModeTrajectory:
    """Integrate to time ``T`` with ``ceil(T/dt)`` equal steps.

    Every ``sample_every`` steps the norms, energies and dissipation terms
    are recorded, as is the running integral of ``||theta||^2`` (trapezoidal
    on the step grid).
    """
    if T <= 0:
        raise ValueError("T must be positive")
    n_steps = int(np.ceil(T / dt - 1e-12))
    dt = T / n_steps
    check_cfl(problem.k, problem.base_flow.max_abs_u, dt)
    grid = problem.grid
    constants = constants or FunctionalConstants()
    stepper = LinearStepper(grid, problem.k, problem.sigma, problem.mu, problem.nu, dt)
    problem._profile = ShearProfile(problem.base_flow, problem.mu, problem.policy)
    jk = build_jk(problem.k, grid) if energies else None
    traj = ModeTrajectory(k=problem.k, nu=problem.nu, mu=problem.mu)
    state = problem.initial_state()
    acc = 0.0

    def record(s):
        traj.times.append(s.t)
        traj.theta_norm.append(grid.norm(s.theta))
        traj.dtheta_norm.append(grid.norm(grid.d1 @ s.theta))
        traj.omega_norm.append(grid.norm(s.omega))
        traj.domega_norm.append(grid.norm(grid.d1 @ s.omega))
        traj.theta_sq_integral.append(acc)
        if energies:
            traj.e_theta.append(energy_theta_k(problem.k, s.theta, problem.nu, grid))
            traj.e_omega.append(
                energy_omega_k(problem.k, s.omega, problem.mu, grid, constants, jk,
                               linear_form=problem.sigma == 0)
            )
            dth, dom = dissipation_components(
                problem.k, s.omega, s.theta, None, problem.mu, problem.nu, grid
            )
            traj.dis_theta.append(dth)
            traj.dis_omega.append(dom)

    record(state)
    prev_sq = grid.norm(state.theta) ** 2
    try:
        for i in range(1, n_steps + 1):
            state = linear_step(problem, state, dt, stepper)
            sq = grid.norm(state.theta) ** 2
            acc += 0.5 * dt * (prev_sq + sq)
            prev_sq = sq
            if i % sample_every == 0 or i == n_steps:
                record(state)
    finally:
        del problem._profile
    traj.final_state = state
    return traj


def fit_decay_rate(trajectory, quantity="theta_energy", window=None) -> float:
    """Least-squares slope of ``-log(quantity)`` against time.

    ``quantity`` is a trajectory field name or an array aligned with
    ``trajectory.times``; ``trajectory`` may also be a bare array of times.
    The default window starts at ``0.2 nu^(-1/3)``.
    """
    times, values = _series(trajectory, quantity)
    if window is None:
        nu = getattr(trajectory, "nu", 0.0)
        t_lo = 0.2 * nu ** (-1 / 3) if nu > 0 else times[0]
        window = (t_lo, times[-1])
    lo, hi = window
    mask = (times >= lo - 1e-12) & (times <= hi + 1e-12)
    if mask.sum() < 2:
        raise ValueError(f"window {window} holds fewer than two samples")
    v = values[mask]
    if np.any(v <= 0):
        raise ValueError("quantity must be positive inside the fit window")
    return float(-np.polyfit(times[mask], np.log(v), 1)[0])


def fit_quality(trajectory, quantity="theta_energy", window=None) -> float:
    """R^2 of the log-linear fit used by :func:`fit_decay_rate`."""
    times, values = _series(trajectory, quantity)
    lo, hi = window if window is not None else (times[0], times[-1])
    mask = (times >= lo - 1e-12) & (times <= hi + 1e-12)
    x, y = times[mask], np.log(values[mask])
    coef = np.polyfit(x, y, 1)
    res = y - np.polyval(coef, x)
    tot = y - y.mean()
    ss = float(tot @ tot)
    return 1.0 - float(res @ res) / ss if ss > 0 else 1.0


def _series(trajectory, quantity):
    if isinstance(trajectory, ModeTrajectory):
        times = np.asarray(trajectory.times, dtype=float)
        values = trajectory.array(quantity) if isinstance(quantity, str) else np.asarray(quantity)
    else:
        times = np.asarray(trajectory, dtype=float)
        values = np.asarray(quantity, dtype=float)
    if times.shape != values.shape:
        raise ValueError("times and quantity have different lengths")
    return times, values


def decay_window(nu: float, k: int, lo: float = 5.0, hi: float = 12.0):
    """Fit window ``[lo, hi] * nu^(-1/3) |k|^(-2/3)`` past the transient."""
    s = nu ** (-1 / 3) * abs(k) ** (-2 / 3)
    return lo * s, hi * s


def decay_run(nu: float, k: int, n_y: int = 128, lo: float = 5.0, hi: float = 12.0,
              policy: str = "frozen", w_in=None, samples: int = 400):
    """theta-only, sigma = 0 run behind the decay-rate scaling study.

    Returns ``(rate, r_squared, trajectory)``.
    """
    from .baseflow import assemble_base_flow, couette
    from .grid import make_grid

    grid = make_grid(n_y)
    bf = couette(grid) if w_in is None else assemble_base_flow(w_in, 0.0, grid)
    y = grid.nodes
    theta0 = np.sin(np.pi * (y + 1) / 2)
    prob = LinearModeProblem(k, 0, nu, nu, bf, np.zeros(grid.size), theta0, policy=policy)
    s = nu ** (-1 / 3) * abs(k) ** (-2 / 3)
    T = hi * s
    dt = min(0.1 / (abs(k) * max(bf.max_abs_u, 1.0)), s / 200)
    n_steps = int(np.ceil(T / dt))
    traj = evolve_mode(prob, T, dt, sample_every=max(1, n_steps // samples), energies=False)
    win = (lo * s, hi * s)
    return fit_decay_rate(traj, "theta_energy", win), fit_quality(traj, "theta_energy", win), traj
