"""Command-line front end: ``advflow run``, ``advflow verify`` and ``advflow sweep``.

Exit codes: 0 success, 1 property violation, 2 configuration error,
3 solver non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .analysis import Extinct, disk_region, loglog_slope, radial_flow_oracle
from .config import ConfigError, RunConfig, parse_config
from .density import analytic_density
from .formats import read_pbm, write_pbm
from .grid import Region, build_grid
from .scheme import SchemeConfig, StepRecord, run_flow
from .solver import SolveConfig

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_NONCONVERGENCE = 0, 1, 2, 3

METRIC_COLUMNS = [
    ("k", "step index"),
    ("t", "time k * eps"),
    ("area", "region volume (cell count times h^N)"),
    ("radius_estimate", "radius of the ball with the same volume"),
    ("hausdorff_vs_oracle", "Hausdorff distance to the radial oracle region (blank without an oracle)"),
    ("symdiff_vs_oracle", "volume of the symmetric difference with the oracle region"),
    ("gap", "certified energy gap of the step's solve"),
    ("set_gap", "certified gap of the thresholded set"),
    ("iters", "solver passes"),
    ("uncertain", "cells whose sign is within the certified slack"),
    ("certified", "1 if the field or the set was certified"),
]

RUNLOG_COLUMNS = [
    ("step", "step index"),
    ("energy", "one-step energy of the returned field"),
    ("gap", "certified energy gap"),
    ("iters", "solver passes"),
    ("subgradient_norm", "norm of the selected subgradient"),
]


@dataclass
class RunResult:
    rows: list[dict] = field(default_factory=list)
    extinct_at: int | None = None
    failed_at: int | None = None
    failure: str | None = None
    masks: int = 0
    seconds: float = 0.0


def _versions() -> dict:
    import numba
    import scipy

    return {"advflow": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def _write_csv(path: Path, columns: list[tuple[str, str]], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        for name, doc in columns:
            fh.write(f"# {name}: {doc}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([c for c, _ in columns])
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c, _ in columns])


def build_problem(cfg: RunConfig):
    """Grid, densities and initial region described by a configuration."""
    try:
        g = build_grid(cfg.extent, cfg.h, cfg["grid.omega"])
        d = analytic_density(cfg["density.family"], cfg["density.params"], g)
        kind = cfg["initial.kind"]
        if kind == "bayes":
            a0 = None
        elif kind == "disk":
            a0 = disk_region(g, cfg["initial.radius"], cfg["initial.center"] or None)
        else:
            a0 = read_pbm(cfg["initial.path"], g)
    except (ValueError, TypeError) as err:
        raise ConfigError(str(err)) from None
    return g, d, a0


def scheme_config(cfg: RunConfig) -> SchemeConfig:
    eps = cfg.eps
    solve = SolveConfig(eps, tol_gap=cfg["solver.tol_gap"], max_iters=cfg["solver.max_iters"],
                        seed=cfg["experiment.seed"], momentum=cfg["solver.momentum"],
                        check_every=cfg["solver.check_every"], tol_set=cfg["solver.tol_set"],
                        coarse_levels=cfg["solver.coarse_levels"], coarse_iters=cfg["solver.coarse_iters"])
    return SchemeConfig(eps, cfg["flow.total_time"], solve, cfg["flow.snapshot_every"], cfg["flow.band"],
                        cfg["flow.require_certificate"])


def _oracle(cfg: RunConfig, grid):
    kind = cfg["oracle.kind"]
    if kind == "none":
        return None
    r0, center = cfg["initial.radius"], cfg["initial.center"] or None

    def oracle(t: float) -> Region:
        try:
            r = radial_flow_oracle(kind, r0, t, grid.dim, cfg["oracle.a"])
        except Extinct:
            return grid.empty()
        return disk_region(grid, r, center)

    return oracle


def run_experiment(cfg: RunConfig, out: Path) -> RunResult:
    """Run one flow and write masks, metrics, the run log, the config copy and a manifest."""
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    g, d, a0 = build_problem(cfg)
    scfg = scheme_config(cfg)
    res = RunResult()
    runlog = []
    n_steps = scfg.n_steps

    def on_step(rec: StepRecord) -> None:
        m = rec.metrics
        rep = rec.report
        row = {"k": rec.k, "t": rec.time, "area": m["area"], "radius_estimate": m["radius"],
               "hausdorff_vs_oracle": m.get("hausdorff_vs_oracle"),
               "symdiff_vs_oracle": m.get("symdiff_vs_oracle")}
        if rep is not None and rep.solver is not None:
            s = rep.solver
            row.update(gap=s.certified_gap, set_gap=s.set_gap, iters=s.iters,
                       uncertain=rep.uncertain.count, certified=int(rep.certified))
            runlog.append({"step": rec.k, "energy": s.energy, "gap": s.certified_gap, "iters": s.iters,
                           "subgradient_norm": s.subgradient_norm})
        res.rows.append(row)
        degenerate = rec.region.is_empty() or rec.region.is_full()
        if rec.k % scfg.snapshot_every == 0 or rec.k == n_steps or degenerate:
            write_pbm(rec.region, out / f"mask_{rec.k:05d}.pbm")
            res.masks += 1

    trace = run_flow(a0, d, scfg, oracle=_oracle(cfg, g), on_step=on_step)
    res.extinct_at, res.failed_at, res.failure = trace.extinct_at, trace.failed_at, trace.failure
    res.seconds = time.perf_counter() - t0
    _write_csv(out / "metrics.csv", METRIC_COLUMNS, res.rows)
    _write_csv(out / "runlog.csv", RUNLOG_COLUMNS, runlog)
    (out / "config.ini").write_text(cfg.canonical())
    status = "failed" if res.failed_at is not None else ("extinct" if res.extinct_at is not None else "done")
    manifest = {"experiment": cfg["experiment.name"], "config_sha256": cfg.digest(), "versions": _versions(),
                "wall_clock_seconds": res.seconds, "status": status, "steps_planned": n_steps,
                "extinct_at_step": res.extinct_at, "failed_at_step": res.failed_at, "failure": res.failure,
                "masks_written": res.masks,
                "files": {"config.ini": "canonical configuration",
                          "metrics.csv": "per-step metrics, columns documented in its header",
                          "runlog.csv": "per-step solver reports, columns documented in its header",
                          "mask_KKKKK.pbm": "region after step KKKKK"}}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return res


def cmd_run(cfg: RunConfig, out: Path | None = None) -> int:
    target = Path(out if out is not None else cfg["experiment.out"])
    res = run_experiment(cfg, target)
    if res.failed_at is not None:
        print(f"solver failure at step {res.failed_at}: {res.failure}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    if res.extinct_at is not None:
        print(f"extinct at step {res.extinct_at} (t = {res.extinct_at * cfg.eps:g})")
    print(f"wrote {res.masks} masks and {len(res.rows)} metric rows to {target}")
    return EXIT_OK


def _row_at(rows: list[dict], k: int) -> dict:
    best = rows[0]
    for r in rows:
        if r["k"] <= k:
            best = r
    return best


def cmd_sweep(cfg: RunConfig, eps_list: Sequence[float], out: Path | None = None) -> int:
    """One run per eps with ``h = eps / h_ratio``; a convergence table at the final time."""
    root = Path(out if out is not None else cfg["experiment.out"])
    root.mkdir(parents=True, exist_ok=True)
    rows, code = [], EXIT_OK
    for eps in eps_list:
        leg = cfg.replace(flow_eps=float(eps), grid_h=None)
        res = run_experiment(leg, root / f"eps_{eps:g}")
        k = int(math.floor(leg["flow.total_time"] / eps + 1e-9))
        r = _row_at(res.rows, k)
        rows.append({"eps": eps, "h": leg.h, "t": leg["flow.total_time"],
                     "hausdorff": r.get("hausdorff_vs_oracle"), "symdiff": r.get("symdiff_vs_oracle"),
                     "radius": r.get("radius_estimate"), "status": "failed" if res.failed_at else "ok"})
        if res.failed_at is not None:
            print(f"leg eps={eps}: solver failure at step {res.failed_at}", file=sys.stderr)
            code = EXIT_NONCONVERGENCE
    for key in ("hausdorff", "symdiff"):
        vals = [r[key] for r in rows]
        for i, r in enumerate(rows):
            prev = vals[i - 1] if i else None
            ok = i == 0 or (vals[i] is not None and prev is not None and vals[i] < prev)
            r[f"{key}_decreasing"] = int(ok)
        finite = [(r["eps"], v) for r, v in zip(rows, vals) if v is not None and math.isfinite(v) and v > 0]
        rate = loglog_slope(*zip(*finite)) if len(finite) >= 2 else math.nan
        for r in rows:
            r[f"{key}_rate"] = rate
    cols = [("eps", "time step and stencil radius"), ("h", "grid spacing"), ("t", "comparison time"),
            ("hausdorff", "Hausdorff distance to the oracle region at t"),
            ("symdiff", "symmetric-difference volume with the oracle region at t"),
            ("radius", "radius estimate at t"), ("status", "ok or failed"),
            ("hausdorff_decreasing", "1 if below the previous leg (first leg 1)"),
            ("symdiff_decreasing", "1 if below the previous leg (first leg 1)"),
            ("hausdorff_rate", "fitted log-log slope of the Hausdorff errors in eps"),
            ("symdiff_rate", "fitted log-log slope of the symmetric-difference errors in eps")]
    _write_csv(root / "convergence.csv", cols, rows)
    print(f"wrote {len(rows)}-row convergence table to {root / 'convergence.csv'}")
    return code


def cmd_verify(suite: str, budget: float = 1.0, out: Path | None = None) -> int:
    from .suites import SUITES

    if suite not in SUITES:
        print(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}", file=sys.stderr)
        return EXIT_CONFIG
    res = SUITES[suite](scale=budget)
    report = json.dumps(res.to_dict(), indent=2, default=float)
    if out is not None:
        Path(out).write_text(report + "\n")
    print(report)
    return EXIT_OK if res.passed else EXIT_VIOLATION


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="advflow", description="Adversarial-training curvature flow experiments")
    p.add_argument("--threads", type=int, default=None, help="worker threads for the compiled kernels")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one flow")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.add_argument("--seed", type=int)
    v = sub.add_parser("verify", help="run a property suite")
    v.add_argument("--suite", required=True)
    v.add_argument("--budget", type=float, default=1.0, help="fraction of the full instance counts")
    v.add_argument("--out", help="write the JSON report here")
    s = sub.add_parser("sweep", help="run one flow per eps")
    s.add_argument("--config", required=True)
    s.add_argument("--eps-list", required=True, help="comma-separated eps values")
    s.add_argument("--out")
    s.add_argument("--seed", type=int)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    if args.threads is not None:
        import numba

        numba.set_num_threads(args.threads)
    try:
        if args.command == "verify":
            return cmd_verify(args.suite, args.budget, args.out)
        cfg = parse_config(args.config)
        if args.seed is not None:
            cfg = cfg.replace(experiment_seed=args.seed)
        if args.command == "run":
            return cmd_run(cfg, args.out)
        eps_list = [float(e) for e in args.eps_list.split(",") if e.strip()]
        if not eps_list:
            raise ConfigError("--eps-list is empty")
        return cmd_sweep(cfg, eps_list, args.out)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
