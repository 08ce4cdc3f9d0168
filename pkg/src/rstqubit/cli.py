"""Command line batch runner: ``rstqubit run | list-presets | verify``.

``run`` evaluates every grid point of every panel of a preset (or a JSON
config), writes one CSV per panel and a ``manifest.json``.  Completed points
are cached as JSON under ``OUT/.points`` so an interrupted run resumes where
it stopped and produces identical files.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy

from . import __version__
from .experiments import ConfigError, ExperimentConfig, config_from_dict, evaluate_point, point_seed
from .presets import PAPER_REALIZATIONS, PRESETS, get_preset, list_presets

SCHEMA_VERSION = 1
THREADS_ENV = "RSTQUBIT_THREADS"


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.12e" % float(value)
    return str(value)


def rows_to_csv(rows: Sequence[dict]) -> str:
    columns: list[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_value(row[c]) if c in row else "" for c in columns])
    return buf.getvalue()


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _jsonable(rows: list[dict]) -> list[dict]:
    return [{k: (float(v) if isinstance(v, (float, np.floating)) else
                 int(v) if isinstance(v, (int, np.integer, bool, np.bool_)) else v)
             for k, v in row.items()} for row in rows]


def _nan_safe(obj):
    """JSON cannot hold NaN portably; store it as a string."""
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _nan_safe(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_nan_safe(v) for v in obj]
    return obj


def _from_nan_safe(obj):
    if obj in ("nan", "inf", "-inf"):
        return float(obj)
    if isinstance(obj, dict):
        return {k: _from_nan_safe(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_from_nan_safe(v) for v in obj]
    return obj


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------


def resolve_threads(flag: int | None) -> int:
    if flag is not None:
        return max(1, int(flag))
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(THREADS_ENV, f"expected an integer, got {env!r}") from None
    return 1


def run_panels(configs: Sequence[ExperimentConfig], out: Path, seed: int = 0, threads: int = 1,
               source: str = "config", log=None) -> dict:
    """Run every panel and write CSVs plus a manifest; returns the manifest."""
    log = log or (lambda msg: None)
    out.mkdir(parents=True, exist_ok=True)
    cache_root = out / ".points"
    started = time.time()
    panels, failures = [], []
    for p, cfg in enumerate(configs):
        cache = cache_root / cfg.name
        cache.mkdir(parents=True, exist_ok=True)
        digest = cfg.digest()
        points = cfg.points()
        seeds = [point_seed(seed, p, k) for k in range(len(points))]
        results: dict[int, list[dict]] = {}
        todo = []
        for k, values in enumerate(points):
            path = cache / f"{k:05d}.json"
            if path.exists():
                data = json.loads(path.read_text())
                if data.get("digest") == digest and data.get("seed") == seeds[k]:
                    results[k] = _from_nan_safe(data["rows"])
                    continue
            todo.append(k)
        log(f"{cfg.name}: {len(points)} points, {len(points) - len(todo)} cached")

        def work(k):
            try:
                return k, evaluate_point(cfg, points[k], seeds[k]), None
            except Exception as exc:  # recorded, the sweep continues
                return k, None, f"{type(exc).__name__}: {exc}"

        if threads > 1 and len(todo) > 1:
            pool = ThreadPoolExecutor(threads)
            outcomes = pool.map(work, todo)
        else:
            pool = None
            outcomes = map(work, todo)
        try:
            for k, rows, error in outcomes:
                if error is not None:
                    failures.append({"panel": cfg.name, "index": k,
                                     "point": dict(zip([a.path for a in cfg.axes], map(float, points[k]))),
                                     "seed": seeds[k], "error": error})
                    log(f"  point {k} failed: {error}")
                    continue
                rows = _jsonable(rows)
                results[k] = rows
                _write_atomic(cache / f"{k:05d}.json",
                              json.dumps({"digest": digest, "seed": seeds[k], "rows": _nan_safe(rows)}))
        finally:
            if pool is not None:
                pool.shutdown()
        rows = [row for k in sorted(results) for row in results[k]]
        text = rows_to_csv(rows)
        (out / f"{cfg.name}.csv").write_text(text)
        panels.append({
            "name": cfg.name,
            "file": f"{cfg.name}.csv",
            "description": cfg.description,
            "gate": cfg.gate,
            "config_digest": digest,
            "n_points": len(points),
            "n_rows": len(rows),
            "columns": text.splitlines()[0].split(",") if rows else [],
            "realizations": cfg.realizations,
            "point_seeds": seeds,
            "reconstructed": list(cfg.reconstructed),
            "config": _nan_safe(cfg.to_dict()),
        })
    finished = time.time()
    run_hash = hashlib.sha256("".join(p["config_digest"] for p in panels).encode()).hexdigest()
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "source": source,
        "master_seed": int(seed),
        "config_hash": run_hash,
        "versions": {"rstqubit": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "threads": threads,
        "started_at": _dt.datetime.fromtimestamp(started, _dt.timezone.utc).isoformat(),
        "wall_time_s": finished - started,
        "panels": panels,
        "failures": failures,
    }
    _write_atomic(out / "manifest.json", json.dumps(manifest, indent=2))
    return manifest


def load_config_file(path: str) -> list[ExperimentConfig]:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError("--config", str(exc)) from None
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON: {exc}") from None
    if isinstance(data, dict) and "panels" in data:
        if not isinstance(data["panels"], list) or not data["panels"]:
            raise ConfigError("panels", "must be a non-empty list")
        out = []
        for i, panel in enumerate(data["panels"]):
            try:
                out.append(config_from_dict(panel, name=f"panel{i}"))
            except ConfigError as exc:
                raise ConfigError(f"panels[{i}].{exc.path}", str(exc).split(": ", 1)[-1]) from None
        return out
    return [config_from_dict(data)]


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def verify_tables() -> dict[str, list[dict]]:
    """Oracle-vs-numeric comparison tables."""
    from scipy.integrate import quad

    from .calibration import frame_params, x90_seed
    from .dynamics import default_grid, propagate
    from .gates import qubit_frame_matrix
    from .metrics import gate_error
    from .oracles import (
        QubitFrameParams,
        error_integrals,
        error_integrands,
        magnus_u0,
        zz_coupler_perturbative,
        zz_direct_perturbative,
    )
    from .pulse import commensurate_width, drive_schedule
    from .spin_model import TWO_PI, eigenstructure, pair_spec, qubit_frequency, table1, zz_interaction

    tables: dict[str, list[dict]] = {}
    d4 = table1("direct4")
    rows = []
    for j in (0.0, 0.25e6, 0.5e6, 1e6, 2e6):
        spec = d4.with_exchange(**{"23": j})
        exact = zz_interaction(eigenstructure(spec)) / TWO_PI
        oracle = zz_direct_perturbative(spec)
        rows.append({"J23_hz": j, "zeta_exact_hz": exact, "zeta_oracle_hz": oracle,
                     "rel_dev": abs(exact - oracle) / abs(oracle) if oracle else abs(exact)})
    tables["zz_direct"] = rows

    c5 = table1("coupler5")
    rows = []
    for fc in (10.50e9, 10.52e9, 10.54e9, 10.56e9, 10.58e9):
        spec = c5.with_larmor(c=fc)
        exact = zz_interaction(eigenstructure(spec)) / TWO_PI
        full = zz_coupler_perturbative(spec, "full")
        large = zz_coupler_perturbative(spec, "large_detuning")
        rows.append({"f_c_hz": fc, "zeta_exact_hz": exact, "zeta_full_hz": full, "zeta_large_hz": large,
                     "rel_dev_full": abs(full - exact) / abs(exact)})
    tables["zz_coupler"] = rows

    rows = []
    for wt, phi in ((7.0, np.pi / 3), (2 * np.pi * 6, 0.0), (20.0, 1.0)):
        tau = 40e-9
        p = QubitFrameParams.from_pair(TWO_PI * 150e6, TWO_PI * 2e6, TWO_PI * 25e6, wt / tau, phi, tau)
        i_x, i_z = error_integrals(p)
        ex = lambda t, k: complex(error_integrands(p, t)[k])
        qx = (quad(lambda t: ex(t, 0).real, 0, tau, limit=400)[0]
              + 1j * quad(lambda t: ex(t, 0).imag, 0, tau, limit=400)[0])
        qz = quad(lambda t: ex(t, 1).real, 0, tau, limit=400)[0]
        rows.append({"omega_d_tau": wt, "phi": phi, "abs_Ix": abs(i_x), "Ix_quad_err": abs(i_x - qx),
                     "Iz": i_z, "Iz_quad_err": abs(i_z - qz)})
    tables["error_integrals"] = rows

    pair = pair_spec(d4, 1)
    es = eigenstructure(pair)
    omega = qubit_frequency(es, 1)
    rows = []
    for n in (6, 10, 20):
        tau = commensurate_width(n, omega)
        amp = x90_seed(pair, 1, tau)
        sch = drive_schedule("12", tau, amp, omega)
        u = qubit_frame_matrix(propagate(pair, sch, default_grid(pair, sch)), es)
        u0 = magnus_u0(frame_params(pair, 1, tau, amp, omega))
        rows.append({"n": n, "infidelity": gate_error(u, u0)})
    tables["magnus_vs_propagation"] = rows
    return tables


def format_table(rows: list[dict]) -> str:
    if not rows:
        return ""
    cols = list(rows[0])
    lines = ["  ".join(f"{c:>16s}" for c in cols)]
    for row in rows:
        lines.append("  ".join(f"{row[c]:>16.6e}" for c in cols))
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rstqubit", description="RST spin-qubit pulse simulations")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a preset or a JSON experiment config")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="JSON config file (one panel, or {'panels': [...]})")
    src.add_argument("--preset", help="built-in preset name (see list-presets)")
    run.add_argument("--seed", type=int, default=0, help="master seed (unsigned 64-bit)")
    run.add_argument("--realizations", type=int, help="override the realization count of every panel")
    run.add_argument("--paper-scale", action="store_true", help=f"use {PAPER_REALIZATIONS} realizations")
    run.add_argument("--threads", type=int, help=f"worker threads (default: ${THREADS_ENV} or 1)")
    run.add_argument("--out", default="results", help="output directory")
    sub.add_parser("list-presets", help="list built-in presets")
    ver = sub.add_parser("verify", help="print oracle-vs-numeric comparison tables")
    ver.add_argument("--out", help="also write one CSV per table to this directory")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list-presets":
            for name, description, n in list_presets():
                panels = ", ".join(p["name"] for p in PRESETS[name].panels)
                print(f"{name:12s} {description} [panels: {panels}; {n} realizations by default]")
            return 0
        if args.command == "verify":
            tables = verify_tables()
            for name, rows in tables.items():
                print(f"== {name}")
                print(format_table(rows))
                if args.out:
                    out = Path(args.out)
                    out.mkdir(parents=True, exist_ok=True)
                    (out / f"verify_{name}.csv").write_text(rows_to_csv(rows))
            return 0
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed", "must be an unsigned 64-bit integer")
        if args.realizations is not None and args.realizations < 1:
            raise ConfigError("--realizations", "must be at least 1")
        threads = resolve_threads(args.threads)
        if args.preset:
            try:
                preset = get_preset(args.preset)
            except KeyError as exc:
                raise ConfigError("--preset", exc.args[0]) from None
            configs = preset.configs(args.realizations, args.paper_scale)
            source = f"preset:{preset.name}"
        else:
            configs = load_config_file(args.config)
            if args.realizations is not None or args.paper_scale:
                n = args.realizations if args.realizations is not None else PAPER_REALIZATIONS
                configs = [ExperimentConfig(**{**c.__dict__, "realizations": n}) for c in configs]
            source = f"config:{args.config}"
        manifest = run_panels(configs, Path(args.out), args.seed, threads, source,
                              log=lambda msg: print(msg, file=sys.stderr))
        print(f"wrote {len(manifest['panels'])} panel(s) to {args.out}; {len(manifest['failures'])} failed point(s)")
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
