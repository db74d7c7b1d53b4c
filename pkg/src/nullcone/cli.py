"""Command line entry point: nullcone <verify|flow|solve|foliate> --config PATH --out DIR [--seed N].

Exit status: 0 when every gate of the task passes, 1 on gate failure, task
error or invalid configuration, 2 when a flow stops on its step or time budget.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import TASKS, ConfigError, build_initial, build_model, parse_config
from .flow import SERIES_COLUMNS, FlowConfig, measure_decay, run_flow
from .foliation import FoliationError, build_foliation, check_foliation
from .geometry import CrossSection
from .identities import codazzi_residual, gauss_residual_closed, simon_full_residual
from .jacobi import NewtonConfig, SolverError, newton_stcmc
from .sphere import get_grid, write_snapshot


def thread_count() -> int:
    raw = os.environ.get("NULLCONE_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError("NULLCONE_THREADS", f"expected a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("NULLCONE_THREADS", f"expected a positive integer, got {raw!r}")
    return n


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def write_json(path: Path, obj) -> None:
    """Atomic write so an interrupted run never leaves a truncated file."""
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    os.replace(tmp, path)


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not serializable: {type(o).__name__}")


# ---------------------------------------------------------------------- tasks

def task_verify(cfg, grid, model, out: Path) -> dict:
    sigma = CrossSection(grid, build_initial(cfg, grid), model, degree=grid.L)
    task = cfg["task"]
    funcs = {"gauss": lambda: gauss_residual_closed(sigma),
             "codazzi": lambda: codazzi_residual(sigma)[0],
             "simon": lambda: simon_full_residual(sigma)}
    # warm the shared caches once so worker threads only read them
    sigma.A, sigma.christoffel, sigma.torsion, sigma.H2, sigma.R
    with ThreadPoolExecutor(max_workers=min(thread_count(), len(task["forms"]))) as ex:
        reports = list(ex.map(lambda f: funcs[f](), task["forms"]))
    rows = []
    gates = {}
    for form, r in zip(task["forms"], reports):
        d = {**r.to_dict(), "name": form}
        write_json(out / f"report_{form}.json", d)
        rows.append(d)
        gates[form] = bool(r.relative <= task["gate_rel"])
    write_csv(out / "series.csv", ["name", "max_residual", "scale", "relative", "bandlimit"], rows)
    return {"status": 0 if all(gates.values()) else 1, "gates": gates, "reason": "done"}


def task_flow(cfg, grid, model, out: Path) -> dict:
    t = cfg["task"]
    fcfg = FlowConfig(cfl=t["cfl"], tol=t["tol"], max_steps=t["max_steps"],
                      max_time=float("inf") if t["max_time"] is None else t["max_time"],
                      snapshot_every=t["snapshot_every"], record_every=t["record_every"], seed=cfg["seed"])
    sigma0 = CrossSection(grid, grid.truncate(build_initial(cfg, grid), grid.L), model, degree=grid.L)

    def snap(idx, step_no, time_, omega):
        write_snapshot(out / f"field_t{idx:04d}.sphere", grid, omega)

    run = run_flow(sigma0, fcfg, scale=cfg["initial"]["sigma"], on_snapshot=snap)
    write_csv(out / "series.csv", SERIES_COLUMNS, run.rows)
    write_snapshot(out / "field_final.sphere", grid, run.sigma.omega)
    area = run.column("area")
    drift = float(np.max(np.abs(area - area[0])) / area[0])
    t_, y = run.column("t"), run.column("l2_dev") ** 2
    try:
        rate = measure_decay(t_, y, floor=1e-24 * y[0])
    except ValueError:
        rate = None
    summary = {**run.summary(), "area_drift": drift, "decay_rate": rate}
    write_json(out / "report_flow.json", summary)
    gates = {"converged": run.converged, "area_drift": drift <= 1e-8}
    if run.reason in ("max_steps", "max_time"):
        status = 2
    else:
        status = 0 if all(gates.values()) else 1
    return {"status": status, "gates": gates, "reason": run.reason}


def task_solve(cfg, grid, model, out: Path) -> dict:
    t = cfg["task"]
    ncfg = NewtonConfig(tol=t["tol"], max_iter=t["max_iter"], linear_tol=t["linear_tol"],
                        max_halvings=t["max_halvings"])
    sigma0 = CrossSection(grid, grid.truncate(build_initial(cfg, grid), grid.L), model, degree=grid.L)
    try:
        run = newton_stcmc(sigma0, ncfg)
        reason, last = run.reason, run.sigma
        rows = run.rows
    except SolverError as exc:
        reason, last, rows = f"failure: {exc}", exc.state, []
    if rows:
        write_csv(out / "series.csv", ["iter", "residual", "c", "damping", "area_error"], rows)
    if last is not None:
        write_snapshot(out / "field_final.sphere", grid, last.omega)
    converged = reason in ("tolerance", "roundoff_floor")
    write_json(out / "report_solve.json", {"reason": reason, "iterations": len(rows) - 1 if rows else 0,
                                          "final_residual": rows[-1]["residual"] if rows else None})
    return {"status": 0 if converged else 1, "gates": {"converged": converged}, "reason": reason}


def task_foliate(cfg, grid, model, out: Path) -> dict:
    t = cfg["task"]
    seed = build_initial(cfg, grid, sigma=t["sigma_min"])

    def on_leaf(i, leaf):
        write_snapshot(out / f"field_t{i:04d}.sphere", grid, leaf.omega)

    try:
        res = build_foliation(model, grid, t["sigma_min"], t["sigma_max"], t["dsigma"], t["method"],
                              seed_omega=seed, on_leaf=on_leaf)
        reason = "done"
    except FoliationError as exc:
        res, reason = exc.partial, f"failure: {exc}"
    write_csv(out / "series.csv", ["sigma", "h2", "rho", "a_norm", "gap_margin"], res.rows())
    report = {"reason": reason, "bondi": res.bondi,
              "Z": [leaf.Z for leaf in res.leaves], "apriori": [leaf.apriori for leaf in res.leaves]}
    gates = {"completed": reason == "done"}
    if len(res.leaves) >= 3:
        chk = check_foliation(res)
        report["check"] = chk
        gates.update({k: chk[k] for k in ("gaps_positive", "h2_decreasing", "dsigma_omega_positive")})
    write_json(out / "report_foliation.json", report)
    return {"status": 0 if all(gates.values()) else 1, "gates": gates, "reason": reason}


TASK_RUNNERS = {"verify": task_verify, "flow": task_flow, "solve": task_solve, "foliate": task_foliate}


def run(cfg: dict, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"config": cfg, "version": __version__, "completed": False}
    write_json(out / "run.json", manifest)
    t0 = time.perf_counter()
    grid = get_grid(cfg["grid"]["bandlimit"])
    model = build_model(cfg["model"])
    try:
        result = TASK_RUNNERS[cfg["task"]["kind"]](cfg, grid, model, out)
    except (SolverError, ValueError) as exc:
        result = {"status": 1, "gates": {"task": False}, "reason": f"error: {exc}"}
    manifest.update({
        "completed": True,
        "wall_time": time.perf_counter() - t0,
        "termination": result["reason"],
        "acceptance": result["gates"],
        "failing_gates": sorted(k for k, v in result["gates"].items() if not v),
        "status": result["status"],
    })
    write_json(out / "run.json", manifest)
    return result["status"]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="nullcone", description="STCMC surfaces on spherically symmetric null cones")
    ap.add_argument("command", choices=TASKS)
    ap.add_argument("--config", required=True, type=Path)
    ap.add_argument("--out", required=True, type=Path)
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args(argv)
    try:
        text = args.config.read_text(encoding="utf-8")
        raw = json.loads(text)
        if isinstance(raw, dict):
            raw.setdefault("task", {}).setdefault("kind", args.command)
            if args.seed is not None:
                raw["seed"] = args.seed
        cfg = parse_config(json.dumps(raw))
        if cfg["task"]["kind"] != args.command:
            raise ConfigError("task.kind", f"is {cfg['task']['kind']!r} but the subcommand is {args.command!r}")
        thread_count()
    except json.JSONDecodeError as exc:
        print(f"error: JSON syntax error at line {exc.lineno} column {exc.colno}: {exc.msg}", file=sys.stderr)
        return 1
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    status = run(cfg, args.out)
    print(json.dumps({"status": status, "out": str(args.out)}))
    return status


if __name__ == "__main__":
    sys.exit(main())
