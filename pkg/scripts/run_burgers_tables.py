#!/usr/bin/env python3
"""Burgers sweeps: task counts (1-4) at 256 cells and mesh sizes (32-256)
at 2 tasks, for the three initial conditions. Emits per-run reports and
an aggregated CSV table via the CLI.

Desk-scale budgets by default; pass --adam/--lbfgs to change them.
"""
import argparse
import os
import subprocess
import sys

CONFIG = """
[experiment]
problem = {problem}
n_cells = {cells}
tasks = {tasks}
seed = 7

[plan]
n_dg = {n_dg}
n_bdy = 128
n_ic = 256
n_rh = 512
n_sup = 512

[optim]
adam_iters = {adam}
lbfgs_iters = {lbfgs}
"""


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--outdir", default="runs/burgers")
    ap.add_argument("--adam", type=int, default=3000)
    ap.add_argument("--lbfgs", type=int, default=400)
    ap.add_argument("--task-sweep", action="store_true", help="tasks 1..4 at 256 cells")
    ap.add_argument("--mesh-sweep", action="store_true", help="cells 32..256 at 2 tasks")
    args = ap.parse_args()
    if not (args.task_sweep or args.mesh_sweep):
        args.task_sweep = args.mesh_sweep = True

    jobs = []
    for problem in ("burgers_gauss", "burgers_riemann", "burgers_sine"):
        if args.task_sweep:
            jobs += [(problem, 256, m) for m in (1, 2, 3, 4)]
        if args.mesh_sweep:
            jobs += [(problem, c, 2) for c in (32, 64, 128)]  # 256/2 already in task sweep

    os.makedirs(args.outdir, exist_ok=True)
    cache = os.path.join(args.outdir, "ref_cache")
    reports = []
    for problem, cells, tasks in jobs:
        name = f"{problem}_c{cells}_m{tasks}"
        rundir = os.path.join(args.outdir, name)
        report = os.path.join(rundir, "report.json")
        if not os.path.exists(report):
            cfg_path = os.path.join(args.outdir, f"{name}.cfg")
            n_dg = 1024 if cells >= 128 else 512
            with open(cfg_path, "w") as fh:
                fh.write(CONFIG.format(
                    problem=problem, cells=cells, tasks=tasks,
                    n_dg=n_dg, adam=args.adam, lbfgs=args.lbfgs,
                ))
            print(f"== {name}", flush=True)
            rc = subprocess.call([
                sys.executable, "-m", "progdg.cli", "run", cfg_path,
                "--outdir", rundir, "--cache-dir", cache,
            ])
            if rc != 0:
                print(f"run {name} failed (exit {rc})", file=sys.stderr)
                return rc
        reports.append(report)

    table = os.path.join(args.outdir, "burgers_table.csv")
    rc = subprocess.call([sys.executable, "-m", "progdg.cli", "table", *reports, "-o", table])
    if rc == 0:
        print(f"table written to {table}")
        with open(table) as fh:
            print(fh.read())
    return rc


if __name__ == "__main__":
    sys.exit(main())
