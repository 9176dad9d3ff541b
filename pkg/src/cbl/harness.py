"""Run directories: CSV tables, SVG plots and the run manifest.

A run directory is valid only once ``manifest.json`` exists; it is always
the last file written and is moved into place atomically.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import logging
import math
import os
import tempfile
from importlib import metadata
from pathlib import Path

from .anchors import ANCHORS
from .config import ConfigError, config_hash, load_config
from .experiments import RUNNERS, Context, Outcome, Table

log = logging.getLogger(__name__)

MANIFEST = "manifest.json"
EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2, 3
DEFAULT_OUT_ROOT = "cbl-runs"


# --- files ----------------------------------------------------------------------

def format_cell(v) -> str:
    """Floats with 17 significant digits, booleans as ``true``/``false``."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    if hasattr(v, "item"):
        return format_cell(v.item())
    return str(v)


def csv_bytes(table: Table) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(table.header)
    for row in table.rows:
        w.writerow([format_cell(v) for v in row])
    return buf.getvalue().encode("utf-8")


def read_csv(path) -> tuple[list, list]:
    """Return ``(header, rows)`` with numeric cells converted to float."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path} is empty")

    def conv(s):
        try:
            return float(s)
        except ValueError:
            return s

    return rows[0], [[conv(c) for c in r] for r in rows[1:]]


def atomic_write(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def code_version() -> str:
    """Package version plus a digest of the package sources."""
    try:
        ver = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        ver = "0+unknown"
    h = hashlib.sha256()
    for p in sorted(Path(__file__).parent.glob("*.py")):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return f"{ver}+src.{h.hexdigest()[:12]}"


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


# --- plots ----------------------------------------------------------------------

def render_svg(spec: dict, run_dir) -> bytes:
    """Render one plot spec from its CSV; output bytes depend only on the CSV."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    header, rows = read_csv(Path(run_dir) / f"{spec['csv']}.csv")
    col = {h: i for i, h in enumerate(header)}
    groups: dict = {}
    for r in rows:
        key = r[col[spec["group"]]] if spec.get("group") else None
        groups.setdefault(key, []).append(r)
    with matplotlib.rc_context({"svg.hashsalt": "cbl", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for key, grp in groups.items():
            x = [r[col[spec["x"]]] for r in grp]
            for yname in spec["y"]:
                y = [r[col[yname]] for r in grp]
                pts = [(a, b) for a, b in zip(x, y)
                       if isinstance(a, float) and isinstance(b, float)
                       and (not spec["logy"] or b > 0) and (not spec["logx"] or a > 0)]
                if not pts:
                    continue
                label = yname if key is None else f"{yname} {spec['group']}={format_cell(key)}"
                ax.plot(*zip(*pts), marker="o" if len(pts) < 50 else None, label=label)
        if spec["logx"]:
            ax.set_xscale("log")
        if spec["logy"]:
            ax.set_yscale("log")
        ax.set_xlabel(spec["xlabel"])
        ax.set_ylabel(spec["ylabel"])
        ax.set_title(spec["title"])
        if ax.get_legend_handles_labels()[0]:
            ax.legend(fontsize=6)
        fig.tight_layout()
        buf = io.BytesIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()


# --- running ----------------------------------------------------------------------

def resolve_out_dir(cfg: dict, out: str | None, seed: int) -> Path:
    if out:
        return Path(out)
    if cfg.get("output_dir"):
        return Path(cfg["output_dir"])
    root = os.environ.get("CBL_OUT_ROOT") or DEFAULT_OUT_ROOT
    return Path(root) / f"{cfg['kind']}-{config_hash(cfg)[:12]}-s{seed}"


def run_experiment(kind: str, config_path=None, out: str | None = None, jobs: int | None = None,
                   seed: int | None = None, plot: bool = False, config_text: str | None = None):
    """Validate the config, run the experiment and write the run directory.

    Returns ``(exit_code, out_dir)``; ``out_dir`` is ``None`` when the config
    is rejected before any work.
    """
    try:
        cfg = load_config(kind, config_path, config_text)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG, None
    if seed is not None:
        cfg["seed"] = int(seed)
    seed = int(cfg.get("seed", 0))
    plot = plot or bool(cfg.get("plot", False))
    out_dir = resolve_out_dir(cfg, out, seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    stale = out_dir / MANIFEST
    if stale.exists():
        stale.unlink()
    jobs = jobs if jobs is not None else (os.cpu_count() or 1)
    ctx = Context(out_dir=str(out_dir), seed=seed, jobs=max(1, int(jobs)))
    started = _now()
    try:
        outcome = RUNNERS[kind](cfg, ctx)
    except (ArithmeticError, FloatingPointError) as exc:
        log.error("numerical abort: %s", exc)
        outcome = Outcome(aborted=f"{type(exc).__name__}: {exc}")
    files = list(outcome.files)
    for name, table in outcome.tables.items():
        atomic_write(out_dir / f"{name}.csv", csv_bytes(table))
        files.append(f"{name}.csv")
    if plot and outcome.aborted is None:
        for spec in outcome.plots:
            atomic_write(out_dir / spec["file"], render_svg(spec, out_dir))
            files.append(spec["file"])
    if outcome.aborted is not None:
        status, code = "abort", EXIT_ABORT
    elif all(a.passed for a in outcome.assertions):
        status, code = "pass", EXIT_PASS
    else:
        status, code = "fail", EXIT_FAIL
    manifest = {
        "kind": kind,
        "status": status,
        "exit_code": code,
        "config_hash": config_hash(cfg),
        "config": cfg,
        "seed": seed,
        "code_version": code_version(),
        "started": started,
        "finished": _now(),
        "abort_reason": outcome.aborted,
        "artifacts": [
            {"file": f, "sha256": sha256_file(out_dir / f), "bytes": (out_dir / f).stat().st_size}
            for f in files
        ],
        "assertions": [
            {"id": a.id, "anchor": a.anchor, "passed": a.passed, "measured": a.measured,
             "expected": a.expected, "detail": a.detail}
            for a in outcome.assertions
        ],
        "informational": outcome.info,
        "plots": outcome.plots,
    }
    atomic_write(out_dir / MANIFEST,
                 json.dumps(manifest, indent=2, sort_keys=True, allow_nan=True).encode())
    return code, out_dir


# --- reporting ----------------------------------------------------------------------

class ManifestError(ValueError):
    pass


REQUIRED_KEYS = ("kind", "status", "exit_code", "config_hash", "code_version", "artifacts",
                 "assertions", "plots")


def load_manifest(run_dir) -> dict:
    path = Path(run_dir) / MANIFEST
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ManifestError(f"{path}: no manifest; the run directory is invalid") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ManifestError(f"{path}: corrupt manifest: {exc}") from exc
    if not isinstance(data, dict) or any(k not in data for k in REQUIRED_KEYS):
        raise ManifestError(f"{path}: manifest lacks required fields")
    return data


def _fmt(v) -> str:
    return format(v, ".6g") if isinstance(v, float) else str(v)


def emit_report(run_dir) -> tuple[str, int]:
    """Summarize a run and regenerate its SVGs from the CSV tables.

    Returns ``(text, exit_code)``: 2 for a missing or corrupt manifest, 1 if
    any assertion failed, 3 for an aborted run, else 0.
    """
    try:
        man = load_manifest(run_dir)
    except ManifestError as exc:
        return str(exc), EXIT_CONFIG
    lines = [f"run: {run_dir}", f"kind: {man['kind']}  status: {man['status'].upper()}",
             f"config hash: {man['config_hash'][:16]}  code: {man['code_version']}"]
    if man.get("abort_reason"):
        lines.append(f"aborted: {man['abort_reason']}")
    failed = 0
    for a in man["assertions"]:
        mark = "PASS" if a["passed"] else "FAIL"
        failed += not a["passed"]
        result = ANCHORS.get(a["anchor"], "(unknown anchor)")
        lines.append(f"{mark} {a['id']}: measured {_fmt(a['measured'])}, expected {a['expected']}")
        lines.append(f"     [{a['anchor']}] {result}")
        if a.get("detail"):
            lines.append(f"     {a['detail']}")
    for name, item in (man.get("informational") or {}).items():
        lines.append(f"INFO {name}: {json.dumps(item, sort_keys=True)}")
    regenerated = []
    for spec in man["plots"]:
        try:
            atomic_write(Path(run_dir) / spec["file"], render_svg(spec, run_dir))
            regenerated.append(spec["file"])
        except (OSError, ValueError, KeyError) as exc:
            lines.append(f"plot {spec.get('file')}: not regenerated ({exc})")
    if regenerated:
        lines.append("plots: " + ", ".join(regenerated))
    text = "\n".join(lines) + "\n"
    atomic_write(Path(run_dir) / "summary.txt", text.encode())
    if man["status"] == "abort":
        return text, EXIT_ABORT
    return text, EXIT_FAIL if failed else EXIT_PASS
