"""End-to-end acceptance criteria, each at its stated tolerance and time budget.

Every test records one line in ``ACCEPTANCE`` which the terminal summary
prints as ``criterion N: PASS|FAIL ...``.
"""

import json
import time

import numpy as np
import pytest

from cbl.baseflow import assemble_base_flow, couette, heat_evolve, sine_correction
from cbl.grid import make_grid
from cbl.harness import EXIT_ABORT, EXIT_CONFIG, EXIT_FAIL, EXIT_PASS, emit_report, load_manifest, run_experiment
from cbl.linear import NonFiniteStateError
from cbl.nonlinear import (
    FlowField, NonlinearRun, NonlinearStepper, read_checkpoint, budget_initial_data,
    write_checkpoint,
)

ACCEPTANCE: dict = {}

pytestmark = pytest.mark.slow


def _record(n, ok, detail):
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")


def _harness(tmp_path, kind, text="{}", **kw):
    cfg = tmp_path / f"{kind}.json"
    cfg.write_text(text)
    t0 = time.perf_counter()
    code, out = run_experiment(kind, cfg, out=str(tmp_path / kind), jobs=1, **kw)
    return code, load_manifest(out), time.perf_counter() - t0


def _summary(man):
    return "; ".join(f"{a['id']}={a['measured']:.4g}" if isinstance(a["measured"], float)
                     else f"{a['id']}={a['measured']}" for a in man["assertions"])


def _check(n, code, man, elapsed, budget):
    ok = code == EXIT_PASS and elapsed < budget
    _record(n, ok, f"({elapsed:.1f} s of {budget} s) {_summary(man)}")
    failed = [a["id"] for a in man["assertions"] if not a["passed"]]
    assert not failed, f"failed assertions: {failed}"
    assert elapsed < budget


def test_criterion_1_greens_machinery(tmp_path):
    code, man, dt = _harness(tmp_path, "verify-greens")
    assert man["config"]["k"] == [1, 4, 16] and man["config"]["n_y"] == 128
    _check(1, code, man, dt, 10)


def test_criterion_2_jk_suite(tmp_path):
    code, man, dt = _harness(tmp_path, "verify-jk")
    assert man["config"]["k"] == list(range(1, 33)) and man["config"]["n_y"] == 256
    _check(2, code, man, dt, 120)


def test_criterion_3_kernel_scalings(tmp_path):
    code, man, dt = _harness(tmp_path, "verify-kernels")
    assert man["config"]["k"] == [2, 4, 8, 16, 32, 64] and man["config"]["w_amplitude"] == 0.01
    _check(3, code, man, dt, 60)


def test_criterion_4_enhanced_dissipation(tmp_path):
    code, man, dt = _harness(tmp_path, "linear-decay")
    cfg = man["config"]
    assert cfg["nu"] == [1e-2, 1e-3, 1e-4, 1e-5] and cfg["k"] == [1, 2, 4, 8]
    assert cfg["k_ref"] == 1 and cfg["nu_ref"] == 1e-4 and cfg["w_h4"] == 0
    _check(4, code, man, dt, 300)


def test_criterion_5_energy_audits(tmp_path):
    code, man, dt = _harness(tmp_path, "energy-audit")
    assert man["config"]["w_h4"] <= 0.01 and man["config"]["n_random"] == 500
    _check(5, code, man, dt, 180)


def test_criterion_6_nonlinear_consistency(tmp_path):
    t0 = time.perf_counter()
    # (a) mean-mode data against the heat oracle
    g = make_grid(32)
    y = g.nodes
    f = FlowField.zeros(3, g)
    f.omega[0], f.theta[0] = np.sin(np.pi * (y + 1) / 2), np.sin(np.pi * (y + 1))
    f.enforce_invariants()
    st = NonlinearStepper(g, 3, NonlinearRun(mu=1e-2, nu=1e-2, dt=0.01, T=1.0), couette(g))
    x = f
    for _ in range(100):
        x = st.step(x)
    err_a = max(np.max(np.abs(x.omega[0] - heat_evolve(f.omega[0].real.copy(), 1e-2, x.t, g))),
                np.max(np.abs(x.theta[0] - heat_evolve(f.theta[0].real.copy(), 1e-2, x.t, g))))
    # (b) nonlinear minus linear deviation against amplitude
    g48 = make_grid(48)
    bf = assemble_base_flow(sine_correction(g48, 0.005), 0.0, g48)
    shape = budget_initial_data(4, g48, 1e-2, 1e-2)
    amps = np.array([1e-3, 2e-3, 4e-3])
    devs = []
    for a in amps:
        f0 = FlowField(g48, a * shape.omega / np.max(np.abs(shape.omega)),
                       a * shape.theta / np.max(np.abs(shape.theta)))
        ends = []
        for nl in (True, False):
            s = NonlinearStepper(g48, 4, NonlinearRun(mu=1e-2, nu=1e-2, dt=0.02, T=5.0, nonlinear=nl), bf)
            z = f0
            for _ in range(250):
                z = s.step(z)
            ends.append(z)
        devs.append(np.sqrt(sum(g48.norm(ends[0].omega[k] - ends[1].omega[k]) ** 2
                                + g48.norm(ends[0].theta[k] - ends[1].theta[k]) ** 2
                                for k in range(5))))
    slope = float(np.polyfit(np.log(amps), np.log(devs), 1)[0])
    # (c) zero data
    z = FlowField.zeros(4, g)
    s = NonlinearStepper(g, 4, NonlinearRun(mu=1e-3, nu=1e-3, dt=0.05, T=1.0), couette(g))
    for _ in range(20):
        z = s.step(z)
    zero_ok = not np.any(z.omega) and not np.any(z.theta)
    # (d) checkpoint round trip
    p = tmp_path / "c.cbl"
    write_checkpoint(p, ends[0], 1e-2, 1e-2)
    back, mu, nu = read_checkpoint(p)
    bit_ok = (back.omega.tobytes() == ends[0].omega.tobytes()
              and back.theta.tobytes() == ends[0].theta.tobytes() and back.t == ends[0].t)
    elapsed = time.perf_counter() - t0
    ok = err_a <= 1e-8 and abs(slope - 2) <= 0.2 and zero_ok and bit_ok and elapsed < 300
    _record(6, ok, f"({elapsed:.1f} s of 300 s) heat error={err_a:.3g}; amplitude slope={slope:.4f}; "
                   f"zero stays zero={zero_ok}; checkpoint bit-exact={bit_ok}")
    assert err_a <= 1e-8
    assert abs(slope - 2) <= 0.2
    assert zero_ok and bit_ok
    assert elapsed < 300


def test_criterion_7_desk_scale_stability(tmp_path):
    code1, man1, dt1 = _harness(tmp_path, "nonlinear-run")
    cfg = man1["config"]
    assert cfg["mu"] == cfg["nu"] == [1e-3] and cfg["eps0"] == cfg["eps1"] == 0.01 and cfg["m"] == 1
    code2, man2, dt2 = _harness(tmp_path, "threshold-sweep")
    assert man2["config"]["mu"] == [1e-4, 3e-4, 1e-3, 3e-3, 1e-2]
    assert man2["config"]["amplitudes"] == [0.25, 0.5, 1, 2, 4, 8]
    elapsed = dt1 + dt2
    slope = man2["informational"].get("threshold_slope", {}).get("value")
    ok = code1 == EXIT_PASS and code2 == EXIT_PASS and elapsed < 1800
    _record(7, ok, f"({elapsed:.1f} s of 1800 s) {_summary(man1)}; {_summary(man2)}; "
                   f"threshold slope (informational)={slope}")
    for man in (man1, man2):
        failed = [a["id"] for a in man["assertions"] if not a["passed"]]
        assert not failed, f"failed assertions: {failed}"
    assert elapsed < 1800


def test_criterion_8_harness_contracts(tmp_path, monkeypatch):
    t0 = time.perf_counter()
    text = '{"n_y": 64, "nu": [1e-2, 1e-3], "k": [1, 2], "nu_ref": 1e-2, "samples": 100}'
    cfg = tmp_path / "d.json"
    cfg.write_text(text)
    _, a = run_experiment("linear-decay", cfg, out=str(tmp_path / "a"), jobs=1, seed=5)
    _, b = run_experiment("linear-decay", cfg, out=str(tmp_path / "b"), jobs=1, seed=5)
    same = all((a / f).read_bytes() == (b / f).read_bytes() for f in ("decay.csv", "decay_curves.csv"))
    codes = {}
    fail_cfg = tmp_path / "f.json"
    fail_cfg.write_text('{"n_y": 32, "k": [1], "n_random": 2, "tolerances": {"green_vs_direct": 0}}')
    codes["fail"] = run_experiment("verify-greens", fail_cfg, out=str(tmp_path / "f"), jobs=1)[0]
    codes["report_fail"] = emit_report(tmp_path / "f")[1]
    for name, body, kind in (("odd", '{\n "n_y": 31\n}', "verify-jk"),
                             ("unknown", '{"tolerances": {"typo": 1}}', "verify-jk"),
                             ("empty", '{"amplitudes": []}', "threshold-sweep")):
        p = tmp_path / f"{name}.json"
        p.write_text(body)
        codes[name] = run_experiment(kind, p, out=str(tmp_path / name), jobs=1)[0]
    codes["report_missing"] = emit_report(tmp_path / "nowhere")[1]

    def nan_step(self, field_):
        raise NonFiniteStateError("NaN in state")

    monkeypatch.setattr("cbl.nonlinear.NonlinearStepper.step", nan_step)
    nl = tmp_path / "n.json"
    nl.write_text('{"n_y": 16, "K": 4, "mu": [1e-2], "nu": [1e-2], "horizon": 0.2}')
    codes["nan"] = run_experiment("nonlinear-run", nl, out=str(tmp_path / "n"), jobs=1)[0]
    expected = {"fail": EXIT_FAIL, "report_fail": EXIT_FAIL, "odd": EXIT_CONFIG,
                "unknown": EXIT_CONFIG, "empty": EXIT_CONFIG, "report_missing": EXIT_CONFIG,
                "nan": EXIT_ABORT}
    elapsed = time.perf_counter() - t0
    ok = same and codes == expected and elapsed < 60
    _record(8, ok, f"({elapsed:.1f} s of 60 s) identical CSV bytes={same}; exit codes={json.dumps(codes)}")
    assert same
    assert codes == expected
    assert elapsed < 60
