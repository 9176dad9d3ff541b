import json
import re
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cbl import cli
from cbl.anchors import ANCHORS
from cbl.experiments import Assertion, Table
from cbl.harness import (
    EXIT_ABORT, EXIT_CONFIG, EXIT_FAIL, EXIT_PASS, csv_bytes, emit_report, format_cell,
    load_manifest, read_csv, run_experiment, sha256_file,
)
from cbl.linear import NonFiniteStateError

DOCS = Path(__file__).resolve().parents[1] / "docs"
GREENS = '{"n_y": 32, "k": [1, 2], "n_random": 5}'
DECAY = '{"n_y": 32, "nu": [1e-2, 1e-3], "k": [1, 2], "nu_ref": 1e-2, "samples": 50}'
NONLIN = ('{"n_y": 16, "K": 4, "mu": [1e-2], "nu": [1e-2], "horizon": 0.3}')


def _run(tmp_path, kind, text, name="run", **kw):
    cfg = tmp_path / f"{name}.json"
    cfg.write_text(text)
    return run_experiment(kind, cfg, out=str(tmp_path / name), jobs=kw.pop("jobs", 1), **kw)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_cells_round_trip(x):
    assert float(format_cell(x)) == x


def test_cell_formats():
    assert format_cell(True) == "true" and format_cell(3) == "3"
    assert format_cell(0.1) == "0.10000000000000001"
    assert format_cell(float("nan")) == "nan"
    assert format_cell(np.float64(2.5)) == "2.5"


def test_csv_quoting_and_line_endings():
    data = csv_bytes(Table(["a", "b"], [["x,y", 1.0], ['say "hi"', 2]]))
    assert data == b'a,b\r\n"x,y",1\r\n"say ""hi""",2\r\n'


def test_greens_run_and_manifest(tmp_path):
    code, out = _run(tmp_path, "verify-greens", GREENS)
    assert code == EXIT_PASS
    man = load_manifest(out)
    assert man["status"] == "pass" and man["exit_code"] == 0
    assert man["code_version"] and len(man["config_hash"]) == 64
    for art in man["artifacts"]:
        assert sha256_file(out / art["file"]) == art["sha256"]
    assert not list(out.glob("*.tmp"))


def test_determinism_identical_csv_bytes(tmp_path):
    _, a = _run(tmp_path, "linear-decay", DECAY, name="a")
    _, b = _run(tmp_path, "linear-decay", DECAY, name="b", jobs=2)
    files = sorted(p.name for p in a.glob("*.csv"))
    assert files == ["decay.csv", "decay_curves.csv"]
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes()
    header, rows = read_csv(a / "decay.csv")
    assert header == ["nu", "k", "fitted_rate", "r_squared"]
    assert len(rows) == 3


def test_seed_changes_random_tables(tmp_path):
    _, a = _run(tmp_path, "verify-greens", GREENS, name="a", seed=1)
    _, b = _run(tmp_path, "verify-greens", GREENS, name="b", seed=2)
    assert (a / "greens.csv").read_bytes() != (b / "greens.csv").read_bytes()
    assert load_manifest(a)["seed"] == 1


def test_failed_assertion_exit_1_and_report(tmp_path):
    code, out = _run(tmp_path, "verify-greens",
                     '{"n_y": 32, "k": [1], "n_random": 2, "tolerances": {"roundtrip": 0}}')
    assert code == EXIT_FAIL
    text, rcode = emit_report(out)
    assert rcode == EXIT_FAIL
    assert re.search(r"^FAIL poisson-roundtrip: measured", text, re.M)
    assert (out / "summary.txt").read_text() == text


def test_config_error_exit_2(tmp_path):
    code, out = _run(tmp_path, "verify-jk", '{"n_y": 63}')
    assert code == EXIT_CONFIG and out is None
    assert not (tmp_path / "run").exists()


def test_numerical_abort_exit_3(tmp_path, monkeypatch):
    def boom(self, field_):
        raise NonFiniteStateError("injected NaN")

    monkeypatch.setattr("cbl.nonlinear.NonlinearStepper.step", boom)
    code, out = _run(tmp_path, "nonlinear-run", NONLIN)
    assert code == EXIT_ABORT
    man = load_manifest(out)
    assert man["status"] == "abort" and "injected NaN" in man["abort_reason"]
    assert (out / "nonlinear_summary.csv").exists()
    assert emit_report(out)[1] == EXIT_ABORT


def test_nonlinear_run_writes_checkpoint(tmp_path):
    from cbl.nonlinear import read_checkpoint

    code, out = _run(tmp_path, "nonlinear-run", NONLIN)
    assert code == EXIT_PASS
    field_, mu, nu = read_checkpoint(out / "final_0.cbl")
    assert mu == nu == 1e-2 and field_.t == pytest.approx(0.3 * 1e-2 ** (-1 / 3))


def test_report_regenerates_identical_svgs(tmp_path):
    code, out = _run(tmp_path, "linear-decay", DECAY, plot=True)
    assert code == EXIT_PASS or code == EXIT_FAIL
    svgs = sorted(out.glob("*.svg"))
    assert [p.name for p in svgs] == ["decay_curves.svg", "decay_rates.svg"]
    before = {p.name: p.read_bytes() for p in svgs}
    emit_report(out)
    emit_report(out)
    assert {p.name: p.read_bytes() for p in svgs} == before
    man = load_manifest(out)
    for art in man["artifacts"]:
        assert sha256_file(out / art["file"]) == art["sha256"]


def test_report_missing_or_corrupt_manifest(tmp_path):
    assert emit_report(tmp_path)[1] == EXIT_CONFIG
    (tmp_path / "manifest.json").write_text("{not json")
    assert emit_report(tmp_path)[1] == EXIT_CONFIG
    (tmp_path / "manifest.json").write_text('{"kind": "x"}')
    assert emit_report(tmp_path)[1] == EXIT_CONFIG


def test_out_root_env(tmp_path, monkeypatch):
    monkeypatch.setenv("CBL_OUT_ROOT", str(tmp_path / "root"))
    cfg = tmp_path / "c.json"
    cfg.write_text(GREENS)
    code, out = run_experiment("verify-greens", cfg, jobs=1, seed=7)
    assert code == EXIT_PASS
    assert out.parent == tmp_path / "root" and out.name.endswith("-s7")


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"amplitudes": []}')
    assert cli.main(["threshold-sweep", "--config", str(bad)]) == EXIT_CONFIG
    good = tmp_path / "g.json"
    good.write_text(GREENS)
    out = tmp_path / "o"
    assert cli.main(["verify-greens", "--config", str(good), "--out", str(out), "--jobs", "1"]) == 0
    assert cli.main(["report", str(out)]) == 0
    assert "PASS poisson-roundtrip" in capsys.readouterr().out
    assert cli.main(["report", str(tmp_path / "missing")]) == EXIT_CONFIG
    assert cli.main(["verify-greens", "--jobs", "0"]) == EXIT_CONFIG
    assert cli.main(["no-such-kind"]) == EXIT_CONFIG
    assert cli.main(["schema"]) == 0


def _documented_anchors():
    rows = re.findall(r"^\| `([^`]+)` \| (.*) \|$", (DOCS / "anchors.md").read_text(), re.M)
    return {k: v.replace("\\|", "|") for k, v in rows}


def test_anchor_table_matches_documentation():
    assert _documented_anchors() == ANCHORS


def test_assertions_require_documented_anchor():
    with pytest.raises(KeyError):
        Assertion("x", "not-an-anchor", True, 0.0, "")


def test_every_emitted_anchor_is_documented():
    """Scan the experiment sources for anchors; each must be in the table, and each entry used."""
    src = (Path(__file__).resolve().parents[1] / "src" / "cbl" / "experiments.py").read_text()
    used = set(re.findall(r'Assertion\(\s*f?"[^"]*",\s*(?:anchor\[c\]|"([^"]+)")', src))
    used.discard("")
    used |= set(re.findall(r'"n\w*": "([a-z-]+)"', src))
    assert used <= set(ANCHORS)
    assert used == set(ANCHORS)


def test_manifest_anchors_documented(tmp_path):
    _, out = _run(tmp_path, "verify-greens", GREENS)
    for a in json.loads((out / "manifest.json").read_text())["assertions"]:
        assert a["anchor"] in _documented_anchors()
