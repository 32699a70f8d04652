"""Command-line harness: ``branchpde {run-scalar|run-ks|run-fd|convergence|compare}``.

Exit codes: 0 success, 2 configuration, 3 model, 4 runtime blow-up or
failed run, 5 I/O.
"""

from __future__ import annotations

import argparse
from dataclasses import fields as dc_fields
import datetime as _dt
import hashlib
from importlib import resources
import json
import math
import os
from pathlib import Path
import sys

import numpy as np

from . import __version__
from .errors import BranchPDEError, ConfigError, SolverBlowupError
from .fd import run_fd
from .metrics import fit_convergence_slope, fit_residual, h_minus_s_distance, rel_l2_grid, write_metrics_csv
from .models import KS_PRESETS, SCALAR_PRESETS, KSModel, ScalarModel, get_preset
from .record import RunRecord
from .solver import SolverConfig, run_ks, run_scalar
from .spectral import SpectralField, project_grid, read_grid_csv, write_grid_csv
from .torus import TorusDomain

EXIT_CONFIG, EXIT_MODEL, EXIT_RUNTIME, EXIT_IO = 2, 3, 4, 5

_SOLVER_KEYS = {f.name for f in dc_fields(SolverConfig)}
_RUN_KEYS = _SOLVER_KEYS | {"preset", "out", "recenter_plots", "run_dir"}
_FD_KEYS = {"preset", "grid", "tau", "t_end", "n_snapshots", "snapshot_times", "safety", "out",
            "recenter_plots", "run_dir"}
_CONV_KEYS = {"preset", "sweep", "reference_n", "seeds", "reference_seed", "tau", "t_end", "K",
              "grid", "field", "workers", "out", "sampler", "mh_step", "mh_burn_in"}
LONG_RUN_N = 320_000


def bundled_config(name: str) -> Path:
    """Path of a config shipped in ``branchpde/configs`` (``.json`` optional)."""
    stem = name[:-5] if name.endswith(".json") else name
    return Path(str(resources.files("branchpde") / "configs" / f"{stem}.json"))


def _load_config(path: str | None) -> dict:
    """Read a JSON config; names of bundled configs are accepted too."""
    if path is None:
        return {}
    if not Path(path).exists() and bundled_config(str(path)).exists():
        path = bundled_config(str(path))
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise _IOFailure(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    return doc


class _IOFailure(BranchPDEError):
    exit_code = EXIT_IO


def _overrides(args: argparse.Namespace) -> dict:
    mapping = {
        "preset": args.preset, "seed": args.seed, "tau": args.tau, "t_end": args.t_end,
        "n": args.n if args.n is not None else args.n_u, "n_v": args.n_v, "K": args.modes,
        "grid": args.grid, "out": args.out, "workers": args.workers, "sampler": args.sampler,
        "n_snapshots": args.snapshots, "run_dir": args.run_dir,
    }
    out = {k: v for k, v in mapping.items() if v is not None}
    if args.recenter_plots:
        out["recenter_plots"] = True
    return out


def _check_keys(doc: dict, allowed: set, what: str) -> None:
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"unknown {what} config field(s): {', '.join(unknown)}")


def _solver_config(doc: dict) -> SolverConfig:
    kwargs = {k: v for k, v in doc.items() if k in _SOLVER_KEYS}
    for key in ("n", "n_v", "K", "seed", "grid", "workers", "n_snapshots", "mh_burn_in", "z_quadrature"):
        if kwargs.get(key) is not None:
            value = kwargs[key]
            if float(value) != int(float(value)):
                raise ConfigError(f"{key} must be an integer, got {value}")
            kwargs[key] = int(float(value))
    try:
        return SolverConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _run_dir(doc: dict, seed) -> Path:
    if doc.get("run_dir"):
        path = Path(doc["run_dir"])
    else:
        stamp = _dt.datetime.now().strftime("%Y%m%d-%H%M%S-%f")
        path = Path(doc.get("out", "runs")) / f"{stamp}_seed{seed}"
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise _IOFailure(f"cannot create run directory {path}: {exc}") from exc
    return path


def _grid_values(field, n: int, domain: TorusDomain, recenter: bool) -> np.ndarray:
    if isinstance(field, SpectralField):
        pts = domain.uniform_grid(n)
        if recenter:
            pts = domain.wrap(pts - math.pi)
        return field.evaluate(pts)
    values = np.asarray(field)
    if recenter:
        values = np.roll(values, shift=[values.shape[0] // 2] * values.ndim, axis=tuple(range(values.ndim)))
    return values.ravel()


def write_run(record: RunRecord, run_dir: Path, grid: int | None, domain: TorusDomain,
              recenter: bool = False) -> None:
    """Persist ``run.json``, ``series.csv`` and all snapshot files."""
    index = []
    try:
        for snap in record.snapshots:
            files = {}
            for name, fld in snap.fields.items():
                n = grid if isinstance(fld, SpectralField) else np.asarray(fld).shape[0]
                csv = run_dir / f"snap_{snap.step}_{name}.csv"
                vals = _grid_values(fld, n, domain, recenter)
                grid_domain = TorusDomain(domain.dim, domain.length, -math.pi if recenter else 0.0)
                write_grid_csv(csv, grid_domain, n, vals)
                files[name] = {"csv": csv.name, "grid": n}
                if isinstance(fld, SpectralField):
                    coef = run_dir / f"snap_{snap.step}_{name}.coef"
                    fld.save(coef)
                    files[name]["coef"] = coef.name
            index.append({"step": snap.step, "t": snap.t, "files": files})
        (run_dir / "series.csv").write_text(record.series_csv())
        (run_dir / "run.json").write_text(record.to_json(index))
    except OSError as exc:
        raise _IOFailure(f"failed writing run output to {run_dir}: {exc}") from exc


def _finish(record: RunRecord, run_dir: Path) -> int:
    print(run_dir)
    if not record.completed:
        print(f"run failed at step {record.failure['step']}: {record.failure['reason']}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


def cmd_run(kind: str, args: argparse.Namespace) -> int:
    doc = _load_config(args.config)
    doc.update(_overrides(args))
    if kind == "fd":
        return _cmd_fd(doc)
    _check_keys(doc, _RUN_KEYS, "run")
    if "preset" not in doc:
        raise ConfigError("a preset name is required")
    model = get_preset(doc["preset"])
    if kind == "scalar" and not isinstance(model, ScalarModel):
        raise ConfigError(f"preset {doc['preset']!r} is not a scalar model; use run-ks")
    if kind == "ks" and not isinstance(model, KSModel):
        raise ConfigError(f"preset {doc['preset']!r} is not a Keller-Segel model; use run-scalar")
    cfg = _solver_config(doc)
    record = run_scalar(model, cfg) if kind == "scalar" else run_ks(model, cfg)
    record.config["preset"] = doc["preset"]
    record.config["recenter_plots"] = bool(doc.get("recenter_plots", False))
    run_dir = _run_dir(doc, cfg.seed)
    write_run(record, run_dir, record.config["grid"], model.domain, bool(doc.get("recenter_plots")))
    return _finish(record, run_dir)


def _cmd_fd(doc: dict) -> int:
    doc = {k: v for k, v in doc.items() if k not in ("seed", "workers", "sampler", "n", "K", "n_v")}
    _check_keys(doc, _FD_KEYS, "fd")
    if "preset" not in doc:
        raise ConfigError("a preset name is required")
    model = get_preset(doc["preset"])
    n = int(doc.get("grid", 100))
    record = run_fd(model, n, float(doc.get("t_end", 0.1)), tau=doc.get("tau"),
                    snapshot_times=doc.get("snapshot_times"), n_snapshots=int(doc.get("n_snapshots", 5)),
                    safety=float(doc.get("safety", 0.5)))
    record.config["preset"] = doc["preset"]
    run_dir = _run_dir(doc, "fd")
    write_run(record, run_dir, None, model.domain, bool(doc.get("recenter_plots")))
    return _finish(record, run_dir)


# ---------------------------------------------------------------- compare

def _snapshot_fields(run_dir: Path) -> tuple[dict, dict]:
    try:
        doc = json.loads((run_dir / "run.json").read_text())
    except OSError as exc:
        raise _IOFailure(f"cannot read {run_dir / 'run.json'}: {exc}") from exc
    return doc, {round(s["t"], 12): s["files"] for s in doc["snapshots"]}


def _load_field(run_dir: Path, files: dict):
    d, n, values = read_grid_csv(run_dir / files["csv"])
    coef = SpectralField.load(run_dir / files["coef"]) if "coef" in files else None
    return n, values, coef


def _align(a, b):
    """Put two snapshot fields on a common grid; B is the reference."""
    (na, va, ca), (nb, vb, cb) = a, b
    if na == nb:
        return va, vb
    if ca is not None:
        return ca.sample_grid(nb), vb
    if cb is not None:
        return va, cb.sample_grid(na)
    if na % nb == 0:
        step = na // nb
        return va[(slice(None, None, step),) * va.ndim], vb
    if nb % na == 0:
        step = nb // na
        return va, vb[(slice(None, None, step),) * vb.ndim]
    raise ConfigError(f"cannot align grids of size {na} and {nb}")


def compare_runs(dir_a, dir_b, s: float | None = None, modes: int | None = None) -> list[tuple]:
    dir_a, dir_b = Path(dir_a), Path(dir_b)
    _, snaps_a = _snapshot_fields(dir_a)
    _, snaps_b = _snapshot_fields(dir_b)
    if sorted(snaps_a) != sorted(snaps_b):
        raise ConfigError(f"snapshot schedules differ: A={sorted(snaps_a)} B={sorted(snaps_b)}")
    rows = []
    for t in sorted(snaps_a):
        for name in sorted(set(snaps_a[t]) & set(snaps_b[t])):
            fa = _load_field(dir_a, snaps_a[t][name])
            fb = _load_field(dir_b, snaps_b[t][name])
            va, vb = _align(fa, fb)
            rows.append((f"rel_l2_{name}", t, rel_l2_grid(va, vb)))
            if s is not None:
                K = modes or (fa[2].K if fa[2] is not None else fb[2].K if fb[2] is not None else None)
                if K is None:
                    raise ConfigError("H^-s comparison of two grid-only runs needs --modes")
                dom = TorusDomain(va.ndim)
                ga = fa[2] if fa[2] is not None and fa[2].K == K else project_grid(fa[1], K, dom)
                gb = fb[2] if fb[2] is not None and fb[2].K == K else project_grid(fb[1], K, dom)
                rows.append((f"h_minus_s_{name}", t, h_minus_s_distance(ga, gb, s)))
    return rows


def cmd_compare(args: argparse.Namespace) -> int:
    rows = compare_runs(args.run_a, args.run_b, args.hminus_s, args.modes)
    out = Path(args.output) if args.output else Path(args.run_a) / f"compare_{Path(args.run_b).name}.csv"
    try:
        write_metrics_csv(out, rows)
    except OSError as exc:
        raise _IOFailure(str(exc)) from exc
    for metric, t, value in rows:
        print(f"{metric} t={t:g} {value:.6g}")
    return 0


# ------------------------------------------------------------ convergence

def _conv_hash(doc: dict, keys) -> str:
    blob = json.dumps({k: doc.get(k) for k in keys}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def run_convergence(doc: dict) -> dict:
    """N-sweep against a reference particle run; returns pairs, slope and notes."""
    _check_keys(doc, _CONV_KEYS, "convergence")
    for key in ("preset", "sweep", "reference_n"):
        if key not in doc:
            raise ConfigError(f"convergence config needs {key!r}")
    sweep = [int(float(n)) for n in doc["sweep"]]
    seeds = [int(s) for s in doc.get("seeds", [1, 2, 3])]
    if len(set(sweep)) < 2 or len(sweep) * len(seeds) < 3:
        raise ConfigError("convergence sweep needs at least two distinct N and three (N, error) points")
    model = get_preset(doc["preset"])
    run = run_ks if isinstance(model, KSModel) else run_scalar
    field = doc.get("field", "u")
    grid = int(doc.get("grid", 64))
    base = {k: doc[k] for k in ("tau", "t_end", "K", "workers", "sampler", "mh_step", "mh_burn_in") if k in doc}
    base.setdefault("tau", 1e-3)
    base.setdefault("t_end", 0.1)
    base["n_snapshots"] = 1
    base["snapshot_times"] = [float(base["t_end"])]

    def final_field(n, seed):
        cfg = _solver_config(dict(base, n=n, seed=seed))
        rec = run(model, cfg)
        if not rec.completed:
            raise SolverBlowupError(f"convergence run N={n} seed={seed} failed: {rec.failure}")
        return rec.snapshots[-1].fields[field]

    ref_n = int(float(doc["reference_n"]))
    ref_seed = int(doc.get("reference_seed", 10_000))
    ref_key = _conv_hash(dict(doc, reference_n=ref_n, reference_seed=ref_seed),
                         ["preset", "reference_n", "reference_seed", "tau", "t_end", "K", "field",
                          "sampler", "mh_step", "mh_burn_in"])
    cache_dir = Path(doc.get("out", "runs")) / "cache"
    cache = cache_dir / f"reference_{ref_key}.coef"
    notes = []
    if cache.exists():
        ref = SpectralField.load(cache)
        notes.append(f"reused cached reference {cache.name}")
    else:
        ref = final_field(ref_n, ref_seed)
        try:
            cache_dir.mkdir(parents=True, exist_ok=True)
            ref.save(cache)
        except OSError as exc:
            raise _IOFailure(str(exc)) from exc
    ref_grid = ref.sample_grid(grid)
    pairs, rows = [], []
    for n in sweep:
        for seed in seeds:
            err = rel_l2_grid(final_field(n, seed).sample_grid(grid), ref_grid)
            pairs.append((n, err))
            rows.append((f"rel_l2_{field}_seed{seed}", n, err))
    slope, intercept = fit_convergence_slope(pairs)
    rows += [("slope", "fit", slope), ("intercept", "fit", intercept),
             ("residual", "fit", fit_residual(pairs, slope, intercept))]
    if max(sweep + [ref_n]) >= LONG_RUN_N:
        notes.append("long-running: particle counts at or above 3.2e5")
    return {"pairs": pairs, "slope": slope, "intercept": intercept, "rows": rows, "notes": notes,
            "reference_key": ref_key}


def cmd_convergence(args: argparse.Namespace) -> int:
    doc = _load_config(args.config)
    if args.out:
        doc["out"] = args.out
    if args.workers:
        doc["workers"] = args.workers
    result = run_convergence(doc)
    out_dir = Path(doc.get("out", "runs"))
    path = out_dir / f"convergence_{result['reference_key']}.csv"
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        write_metrics_csv(path, result["rows"])
        if result["notes"]:
            path.write_text("".join(f"# {n}\n" for n in result["notes"]) + path.read_text())
    except OSError as exc:
        raise _IOFailure(str(exc)) from exc
    print(path)
    print(f"slope {result['slope']:.4f}")
    return 0


# ------------------------------------------------------------------- main

def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--preset", help=f"one of {sorted(SCALAR_PRESETS) + sorted(KS_PRESETS)}")
    p.add_argument("--seed", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--t-end", type=float, dest="t_end")
    p.add_argument("--n", type=int, help="initial particle count (cells for KS)")
    p.add_argument("--n-u", type=int, dest="n_u", help="alias of --n for KS runs")
    p.add_argument("--n-v", type=int, dest="n_v")
    p.add_argument("--modes", type=int, help="Fourier truncation K")
    p.add_argument("--grid", type=int, help="grid size per axis for snapshots / FD")
    p.add_argument("--snapshots", type=int, help="number of evenly spaced snapshots")
    p.add_argument("--sampler", choices=["auto", "mh", "rejection"])
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="parent directory for run directories")
    p.add_argument("--run-dir", dest="run_dir", help="exact run directory (overrides --out)")
    p.add_argument("--recenter-plots", action="store_true", dest="recenter_plots",
                   help="write grid snapshots on [-pi, pi)^d")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="branchpde", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run-scalar", "run-ks", "run-fd"):
        _add_run_flags(sub.add_parser(name))
    conv = sub.add_parser("convergence")
    conv.add_argument("--config", required=True)
    conv.add_argument("--out")
    conv.add_argument("--workers", type=int)
    cmp_ = sub.add_parser("compare")
    cmp_.add_argument("run_a")
    cmp_.add_argument("run_b", help="reference run")
    cmp_.add_argument("--hminus-s", type=float, dest="hminus_s", help="also report H^-s distance")
    cmp_.add_argument("--modes", type=int)
    cmp_.add_argument("--output")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else 0
    try:
        if args.command == "run-scalar":
            return cmd_run("scalar", args)
        if args.command == "run-ks":
            return cmd_run("ks", args)
        if args.command == "run-fd":
            return cmd_run("fd", args)
        if args.command == "convergence":
            return cmd_convergence(args)
        return cmd_compare(args)
    except BranchPDEError as exc:
        print(f"branchpde: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"branchpde: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
