#!/usr/bin/env python3
"""Sod shock tube: progressive hybrid vs vanilla PINN vs first-order DG
at 256 cells, 2 tasks. The PINN gets the hybrid's total iteration budget.
"""
import argparse
import os
import subprocess
import sys

HYBRID = """
[experiment]
problem = sod
n_cells = 256
tasks = 2
seed = 7

[plan]
n_dg = 2048
n_bdy = 256
n_ic = 512
n_rh = 1024
n_sup = 1024

[optim]
adam_iters = {adam}
lbfgs_iters = {lbfgs}
"""


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--outdir", default="runs/sod")
    ap.add_argument("--adam", type=int, default=4000)
    ap.add_argument("--lbfgs", type=int, default=500)
    args = ap.parse_args()
    os.makedirs(args.outdir, exist_ok=True)
    cache = os.path.join(args.outdir, "ref_cache")

    hybrid_cfg = os.path.join(args.outdir, "sod_hybrid.cfg")
    with open(hybrid_cfg, "w") as fh:
        fh.write(HYBRID.format(adam=args.adam, lbfgs=args.lbfgs))
    pinn_cfg = os.path.join(args.outdir, "sod_pinn.cfg")
    with open(pinn_cfg, "w") as fh:
        fh.write(HYBRID.format(adam=2 * args.adam, lbfgs=2 * args.lbfgs).replace("tasks = 2", "tasks = 1"))

    reports = []
    for name, cmd in [
        ("hybrid", ["run", hybrid_cfg]),
        ("pinn", ["baseline", pinn_cfg, "--which", "pinn"]),
        ("dg", ["baseline", hybrid_cfg, "--which", "dg"]),
    ]:
        rundir = os.path.join(args.outdir, name)
        report = os.path.join(rundir, "report.json")
        if not os.path.exists(report):
            print(f"== sod {name}", flush=True)
            rc = subprocess.call([
                sys.executable, "-m", "progdg.cli", *cmd,
                "--outdir", rundir, "--cache-dir", cache,
            ])
            if rc != 0:
                return rc
        reports.append(report)

    table = os.path.join(args.outdir, "sod_table.csv")
    rc = subprocess.call([sys.executable, "-m", "progdg.cli", "table", *reports, "-o", table])
    if rc == 0:
        with open(table) as fh:
            print(fh.read())
    return rc


if __name__ == "__main__":
    sys.exit(main())
