"""Command-line front end: run, baseline, table, plot-data.

Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
Heavy imports happen inside main() so that PROGDG_THREADS can cap the
BLAS thread pool before numpy loads.
"""
from __future__ import annotations

import argparse
import json
import os
import sys


def _apply_thread_env():
    n = os.environ.get("PROGDG_THREADS")
    if n:
        for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, n)


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _sci3(v: float) -> str:
    """Scientific notation with 3 significant digits: 0.00626 -> 6.26e-3."""
    if v == 0.0:
        return "0.00e0"
    import math

    exp = math.floor(math.log10(abs(v)))
    mant = v / 10.0 ** exp
    mant = round(mant, 2)
    if abs(mant) >= 10.0:
        mant /= 10.0
        exp += 1
    return f"{mant:.2f}e{exp}"


def cmd_run(args) -> int:
    from . import config as cfgmod
    from . import dg_core, neural, optim, problems, reference

    cfg = cfgmod.parse_config(args.config)
    outdir = args.outdir or cfg.outdir
    os.makedirs(outdir, exist_ok=True)
    problem = problems.make_problem(cfg.problem)
    cache = args.cache_dir
    net, report, _ = optim.run_progressive(problem, cfg, outdir=outdir, cache_dir=cache)
    _write_json(os.path.join(outdir, "report.json"), report.to_json_dict())
    # Wall time lives in a sidecar: report.json stays byte-reproducible.
    _write_json(os.path.join(outdir, "timing.json"), {"wall_seconds": report.wall_seconds})
    _write_snapshots(os.path.join(outdir, "snapshots.csv"), net, problem, cfg.n_cells)
    print(f"wrote {outdir}/report.json; errors: {report.errors}")
    return 0


def _write_snapshots(path, net, problem, n_cells):
    from . import neural, reference

    grid = reference.default_grid(problem, n_cells)
    names = problem.component_names
    header = "x,t," + ",".join(f"comp_{i}" for i in range(len(names)))
    lines = [header]
    for t in grid.times:
        vals = neural.predict(net, grid.xs, [t] * len(grid.xs))
        for x, row in zip(grid.xs, vals):
            lines.append(",".join([f"{x:.17g}", f"{t:.17g}"] + [f"{v:.17g}" for v in row]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_baseline(args) -> int:
    from . import config as cfgmod
    from . import problems, reference
    from .errors import ConfigError

    if args.which not in ("dg", "pinn"):
        raise ConfigError(f"unknown baseline {args.which!r} (expected dg or pinn)")
    cfg = cfgmod.parse_config(args.config)
    outdir = args.outdir or cfg.outdir
    os.makedirs(outdir, exist_ok=True)
    problem = problems.make_problem(cfg.problem)
    import time

    t0 = time.perf_counter()
    if args.which == "dg":
        errors = reference.dg_baseline_errors(problem, cfg.n_cells, cfl=cfg.cfl, cache_dir=args.cache_dir)
        report = reference.ErrorReport(
            problem=problem.pid,
            cells=cfg.n_cells,
            tasks=0,
            seed=cfg.seed,
            boundaries=[0.0, problem.T],
            errors=errors,
            grid=reference.default_grid(problem, cfg.n_cells).describe(),
            wall_seconds=time.perf_counter() - t0,
            method="dg",
        )
    else:
        _, report = reference.pinn_baseline(
            problem, cfg, cache_dir=args.cache_dir,
            log_path=os.path.join(outdir, "loss_log.csv"),
        )
    _write_json(os.path.join(outdir, "report.json"), report.to_json_dict())
    _write_json(os.path.join(outdir, "timing.json"), {"wall_seconds": report.wall_seconds})
    print(f"wrote {outdir}/report.json; errors: {report.errors}")
    return 0


_TABLE_COMPONENTS = ("rho", "u", "p")


def cmd_table(args) -> int:
    from .errors import ConfigError

    if not args.reports:
        raise ConfigError("table needs at least one report.json")
    rows = []
    for path in args.reports:
        try:
            with open(path) as fh:
                doc = json.load(fh)
            row = [doc["problem"], str(doc["cells"]), str(doc["tasks"]), doc.get("method", "progressive")]
            errors = doc["errors"]
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            raise ConfigError(f"bad report {path}: {exc}") from None
        for comp in _TABLE_COMPONENTS:
            row.append(_sci3(float(errors[comp])) if comp in errors else "")
        rows.append(row)
    header = ["problem", "cells", "tasks", "method", *_TABLE_COMPONENTS]
    out_lines = [",".join(header)] + [",".join(r) for r in rows]
    text = "\n".join(out_lines) + "\n"
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_plotdata(args) -> int:
    import numpy as np

    from . import neural, problems, reference
    from .errors import ConfigError

    net, meta = neural.load_network(args.checkpoint)
    if "problem" not in meta:
        raise ConfigError(f"checkpoint {args.checkpoint} carries no problem metadata")
    problem = problems.make_problem(meta["problem"])
    times = [float(t) for t in args.times.split(",") if t.strip() != ""]
    if not times:
        raise ConfigError("no times requested")
    for t in times:
        if t < 0.0 or t > problem.T * (1.0 + 1e-12):
            raise ConfigError(f"time {t} outside [0, {problem.T}]")
    outdir = args.outdir
    os.makedirs(outdir, exist_ok=True)
    xs = np.linspace(problem.a, problem.b, args.points)
    names = problem.component_names
    need_fine = any(reference.exact_net_values(problem, xs[:1], t) is None for t in times)
    table = None
    if need_fine:
        table = reference.reference_fine(problem, times, cache_dir=args.cache_dir)
    written = []
    for ti, t in enumerate(times):
        pred = neural.predict(net, xs, np.full_like(xs, t))
        ref = reference.exact_net_values(problem, xs, t)
        if ref is None:
            from . import law as _law

            ref = _law.conserved_to_primitive(problem.law, table.at(xs, ti))
        header = "x," + ",".join(f"pred_{n}" for n in names) + "," + ",".join(f"ref_{n}" for n in names)
        lines = [header]
        for i, x in enumerate(xs):
            cols = [f"{x:.17g}"] + [f"{v:.17g}" for v in pred[i]] + [f"{v:.17g}" for v in ref[i]]
            lines.append(",".join(cols))
        path = os.path.join(outdir, f"plot_t{ti}.csv")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        written.append(path)
    print("wrote " + ", ".join(written))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="progdg", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    runp = sub.add_parser("run", help="train the progressive solver from a config file")
    runp.add_argument("config")
    runp.add_argument("--outdir", default=None, help="override the config outdir")
    runp.add_argument("--cache-dir", default=None, help="reference-table cache directory")
    runp.set_defaults(fn=cmd_run)

    basep = sub.add_parser("baseline", help="run a DG or vanilla-PINN baseline")
    basep.add_argument("config")
    basep.add_argument("--which", required=True, help="dg or pinn")
    basep.add_argument("--outdir", default=None)
    basep.add_argument("--cache-dir", default=None)
    basep.set_defaults(fn=cmd_baseline)

    tabp = sub.add_parser("table", help="aggregate report.json files into a CSV table")
    tabp.add_argument("reports", nargs="*")
    tabp.add_argument("-o", "--output", default=None)
    tabp.set_defaults(fn=cmd_table)

    plotp = sub.add_parser("plot-data", help="dump prediction/reference CSVs at given times")
    plotp.add_argument("checkpoint")
    plotp.add_argument("--times", required=True, help="comma-separated times")
    plotp.add_argument("--points", type=int, default=1024)
    plotp.add_argument("--outdir", default="plot_data")
    plotp.add_argument("--cache-dir", default=None)
    plotp.set_defaults(fn=cmd_plotdata)
    return p


def main(argv=None) -> int:
    _apply_thread_env()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    from .errors import ConfigError, ProgdgError, UsageError

    try:
        return args.fn(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ProgdgError as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
