import numpy as np
import pytest

from cbl.baseflow import assemble_base_flow, couette, heat_evolve, sine_correction
from cbl.energy import aggregate_script_energies
from cbl.grid import make_grid
from cbl.linear import CFLError
from cbl.nonlinear import (
    FlowField, NonlinearRun, NonlinearStepper, RunResult, advection, advection_direct,
    anisotropic_norm, cheb_coeffs, cheb_values, check_cfl_nonlinear, classify, envelope_rate,
    read_checkpoint, run_nonlinear, budget_initial_data, write_checkpoint,
)
from conftest import sine_half

G = make_grid(32)


def _poly_field(K, grid, rng, deg=8):
    f = FlowField.zeros(K, grid)
    y = grid.nodes
    for k in range(K + 1):
        for name in ("omega", "theta"):
            c = rng.standard_normal(deg) + (1j * rng.standard_normal(deg) if k else 0)
            getattr(f, name)[k] = (1 - y**2) * np.polynomial.chebyshev.chebval(y, c)
    f.invalidate()
    return f


def test_chebyshev_transform_roundtrip(rng):
    v = rng.standard_normal((3, 33))
    np.testing.assert_allclose(cheb_values(cheb_coeffs(v)), v, atol=1e-14)


def test_advection_of_zero_field():
    assert np.all(advection(FlowField.zeros(4, G)) == 0)


def test_mean_mode_only_has_no_advection():
    f = FlowField.zeros(4, G)
    f.omega[0] = sine_half(G.nodes)
    f.theta[0] = np.sin(np.pi * (G.nodes + 1))
    assert np.max(np.abs(advection(f, "omega"))) == 0
    assert np.max(np.abs(advection(f, "theta"))) == 0


def test_advection_matches_convolution(rng):
    grid = make_grid(48)
    f = _poly_field(3, grid, rng)
    for target in ("omega", "theta"):
        fast = advection(f, target)
        for k in range(4):
            direct = advection_direct(f, k, target)
            assert np.max(np.abs(fast[k] - direct)) <= 1e-8 * max(1.0, np.max(np.abs(direct)))


def test_two_mode_product():
    grid = make_grid(32)
    y = grid.nodes
    f = FlowField.zeros(2, grid)
    f.omega[1] = (1 - y**2) * (1 + y)
    f.invalidate()
    np.testing.assert_allclose(advection(f)[2], advection_direct(f, 2), atol=1e-8)


def test_zero_stays_zero():
    run = NonlinearRun(mu=1e-2, nu=1e-2, dt=0.01, T=0.1)
    st = NonlinearStepper(G, 4, run, couette(G))
    f = FlowField.zeros(4, G)
    for _ in range(10):
        f = st.step(f)
    assert np.all(f.omega == 0) and np.all(f.theta == 0)


def test_mean_mode_follows_heat_equation():
    y = G.nodes
    f = FlowField.zeros(3, G)
    f.omega[0], f.theta[0] = sine_half(y), np.sin(np.pi * (y + 1))
    f.enforce_invariants()
    run = NonlinearRun(mu=1e-2, nu=1e-2, dt=0.01, T=1.0)
    st = NonlinearStepper(G, 3, run, couette(G))
    x = f
    for _ in range(100):
        x = st.step(x)
    w0 = f.omega[0].real.copy()
    t0 = f.theta[0].real.copy()
    assert np.max(np.abs(x.omega[0] - heat_evolve(w0, 1e-2, x.t, G))) <= 1e-8
    assert np.max(np.abs(x.theta[0] - heat_evolve(t0, 1e-2, x.t, G))) <= 1e-8
    assert np.all(x.omega[1:] == 0)


def test_invariants_hold_after_steps(rng):
    f = _poly_field(3, G, rng)
    f = FlowField(G, 1e-3 * f.omega, 1e-3 * f.theta)
    run = NonlinearRun(mu=1e-2, nu=1e-2, dt=0.005, T=0.05)
    st = NonlinearStepper(G, 3, run, couette(G))
    for _ in range(3):
        f = st.step(f)
    d = f.invariant_defects()
    assert d["wall"] == 0 and d["mean_imag"] == 0


def _deviation(a, grid, bf, steps=250):
    f0 = budget_initial_data(4, grid, 1e-2, 1e-2, scale=1.0)
    f0 = FlowField(grid, a * f0.omega / np.max(np.abs(f0.omega)), a * f0.theta / np.max(np.abs(f0.theta)))
    out = []
    for nl in (True, False):
        run = NonlinearRun(mu=1e-2, nu=1e-2, dt=0.02, T=steps * 0.02, nonlinear=nl)
        st = NonlinearStepper(grid, 4, run, bf)
        x = f0
        for _ in range(steps):
            x = st.step(x)
        out.append(x)
    return np.sqrt(sum(grid.norm(out[0].omega[k] - out[1].omega[k]) ** 2 for k in range(5)))


def test_nonlinear_deviation_is_quadratic():
    grid = make_grid(48)
    bf = assemble_base_flow(sine_correction(grid, 0.005), 0.0, grid)
    amps = np.array([1e-3, 2e-3, 4e-3])
    dev = [_deviation(a, grid, bf) for a in amps]
    slope = np.polyfit(np.log(amps), np.log(dev), 1)[0]
    assert abs(slope - 2) <= 0.2


def test_tiny_data_follows_linear_energy():
    grid = make_grid(32)
    bf = couette(grid)
    f0 = budget_initial_data(4, grid, 1e-2, 1e-2)
    f0 = FlowField(grid, 1e-6 * f0.omega / np.max(np.abs(f0.omega)),
                   1e-6 * f0.theta / np.max(np.abs(f0.theta)))
    res = {}
    for nl in (True, False):
        run = NonlinearRun(mu=1e-2, nu=1e-2, dt=0.01, T=0.01, nonlinear=nl)
        x = NonlinearStepper(grid, 4, run, bf).step(f0)
        res[nl] = aggregate_script_energies(x, x.t, 1e-2, 1e-2).script_e_theta
    e0 = aggregate_script_energies(f0, 0.0, 1e-2, 1e-2).script_e_theta
    assert abs((res[True] - e0) - (res[False] - e0)) <= 1e-3 * abs(res[False] - e0)


def test_initial_data_budget():
    grid = make_grid(32)
    f = budget_initial_data(4, grid, 1e-3, 2e-3, eps0=0.02, eps1=0.05)
    lam = 1e-3
    assert anisotropic_norm(f.omega, 1e-3, 1.0, grid) == pytest.approx(0.02 * np.sqrt(lam), rel=1e-12)
    assert anisotropic_norm(f.theta, 2e-3, 1.0, grid) == pytest.approx(0.05 * lam, rel=1e-12)
    with pytest.raises(ValueError):
        budget_initial_data(3, grid, 1e-3, 1e-3)


def test_checkpoint_roundtrip(tmp_path, rng):
    f = _poly_field(3, G, rng)
    f.t = 1.2345678901234567
    p = tmp_path / "state.cbl"
    write_checkpoint(p, f, 1e-3, 2e-3)
    g, mu, nu = read_checkpoint(p)
    assert (mu, nu, g.t) == (1e-3, 2e-3, f.t)
    assert g.omega.tobytes() == f.omega.tobytes() and g.theta.tobytes() == f.theta.tobytes()
    write_checkpoint(tmp_path / "again.cbl", g, mu, nu)
    assert (tmp_path / "again.cbl").read_bytes() == p.read_bytes()


def test_checkpoint_rejects_corruption(tmp_path):
    f = FlowField.zeros(2, G)
    p = tmp_path / "s.cbl"
    write_checkpoint(p, f, 1e-3, 1e-3)
    raw = p.read_bytes()
    for bad in (b"XXXX" + raw[4:], raw[:-8], raw[:10], raw[:4] + (9).to_bytes(4, "little") + raw[8:]):
        p.write_bytes(bad)
        with pytest.raises(ValueError):
            read_checkpoint(p)


def test_cfl_violation_raises():
    f = FlowField.zeros(4, G)
    with pytest.raises(CFLError):
        check_cfl_nonlinear(f, couette(G), 1.0)


class _Rec:
    def __init__(self, t, et, ew, nz=1.0):
        self.t, self.script_e_theta, self.script_e_omega, self.nonzero_energy = t, et, ew, nz


def test_classify():
    assert classify([]) == "unknown"
    assert classify([_Rec(0, 1, 1), _Rec(1, 9.9, 2)]) == "stable"
    assert classify([_Rec(0, 1, 1), _Rec(1, 1, 10.5)]) == "unstable"
    assert classify([_Rec(0, 1, 1), _Rec(1, np.nan, 1)]) == "unstable"


def test_envelope_rate_synthetic():
    t = np.linspace(0, 10, 21)
    res = RunResult([_Rec(s, 1, 1, np.exp(-0.6 * s)) for s in t], None, "stable")
    assert envelope_rate(res) == pytest.approx(0.3, abs=1e-12)


def test_small_run_is_stable():
    grid = make_grid(32)
    bf = couette(grid)
    f0 = budget_initial_data(4, grid, 1e-2, 1e-2)
    run = NonlinearRun(mu=1e-2, nu=1e-2, dt=0.02, T=2.0, sample_every=10)
    res = run_nonlinear(f0, run, bf)
    assert res.classification == "stable" and res.error is None
    assert len(res.records) == 11
