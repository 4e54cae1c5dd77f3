#!/usr/bin/env python3
"""DG convergence orders on smooth data, q in {0, 1}."""
import numpy as np

from progdg import dg_core, problems, reference


def study(title, pid, T, degree, cfl):
    prob = problems.make_problem(pid)
    print(f"\n{title}")
    print("  cells      h        rel-L2      rate")
    prev = None
    errs, hs = [], []
    for n in (32, 64, 128, 256):
        mesh = dg_core.Mesh1D(prob.a, prob.length, n)
        final = dg_core.solve(prob.law, mesh, prob.ic_cons, dg_core.PERIODIC, T, cfl=cfl, degree=degree)[-1]
        xs = mesh.centers()
        pred = dg_core.evaluate_many(final, mesh, xs)[:, 0]
        if pid == "advection_sine":
            ref = prob.bdy_net(xs, np.full_like(xs, T))[:, 0]
        else:
            ref = reference.burgers_exact(pid, xs, T)
        err = np.linalg.norm(pred - ref) / np.linalg.norm(ref)
        rate = "" if prev is None else f"{np.log2(prev / err):5.2f}"
        print(f"  {n:5d}  {mesh.h:8.5f}  {err:.3e}   {rate}")
        prev = err
        errs.append(err)
        hs.append(mesh.h)
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    print(f"  least-squares order: {slope:.2f}")


if __name__ == "__main__":
    study("advection (smooth sine), q=0", "advection_sine", 0.5, 0, 0.3)
    study("Burgers (pre-shock sine), q=1", "burgers_sine", 0.2, 1, 0.15)
