"""Reference solutions, error metrics, and the vanilla PINN baseline.

Exact references: transport for advection, characteristic solves for
smooth Burgers data (pre-breaking), the analytic shock for the Burgers
Riemann case, and an exact Riemann solver for the Sod tube. Post-breaking
Burgers cases fall back to a fine DG solution that must pass a
self-convergence gate before use.
"""
from __future__ import annotations

import hashlib
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import dg_core, law as _law, problems as _problems
from .errors import ConfigError, NumericalError, ProgdgError, UsageError

# -- Burgers characteristic solutions -----------------------------------------


def breaking_time(ic: str) -> float:
    """First shock time 1 / max(-u0'). Infinite for non-compressive data."""
    if ic == _problems.BURGERS_GAUSS:
        return math.exp(0.5) / math.sqrt(2.0)
    if ic == _problems.BURGERS_SINE:
        return 1.0 / math.pi
    if ic == _problems.BURGERS_RIEMANN:
        return 0.0
    raise UsageError(f"no breaking time for ic {ic!r}")


_IC_FUNCS = {
    _problems.BURGERS_GAUSS: (
        lambda x: np.exp(-x * x),
        lambda x: -2.0 * x * np.exp(-x * x),
        0.0,
        1.0,
    ),
    _problems.BURGERS_SINE: (
        lambda x: np.sin(np.pi * x),
        lambda x: np.pi * np.cos(np.pi * x),
        -1.0,
        1.0,
    ),
}


def _bisect_characteristic(u0, x, t, lo, hi):
    a, b = lo, hi
    ga = a - u0(x - a * t)
    for _ in range(200):
        m = 0.5 * (a + b)
        gm = m - u0(x - m * t)
        if ga * gm <= 0.0:
            b = m
        else:
            a, ga = m, gm
    return 0.5 * (a + b)


def burgers_exact(ic: str, x, t: float):
    """Entropy solution for the three Burgers ICs, or None when a shock
    has formed and no analytic expression is implemented (caller falls
    back to the fine DG reference)."""
    if t < 0.0:
        raise UsageError("burgers_exact needs t >= 0")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if ic == _problems.BURGERS_RIEMANN:
        # Shock speed from the jump relation: s = (f(1)-f(0)) / (1-0) = 1/2.
        vals = np.where(xs < 0.5 + 0.5 * t, 1.0, 0.0)
        return vals if np.ndim(x) else float(vals[0])
    if ic not in _IC_FUNCS:
        raise UsageError(f"unknown Burgers ic {ic!r}")
    if t >= breaking_time(ic) * (1.0 - 1e-12):
        return None
    u0, du0, lo, hi = _IC_FUNCS[ic]
    if t == 0.0:
        vals = u0(xs)
        return vals if np.ndim(x) else float(vals[0])
    u = u0(xs)
    for _ in range(100):
        xi = xs - u * t
        g = u - u0(xi)
        gp = 1.0 + t * du0(xi)
        step = g / np.where(np.abs(gp) > 1e-14, gp, 1e-14)
        u_new = np.clip(u - step, lo, hi)
        if np.max(np.abs(u_new - u)) < 1e-14:
            u = u_new
            break
        u = u_new
    res = np.abs(u - u0(xs - u * t))
    bad = np.nonzero(res > 1e-11)[0]
    for i in bad:
        u[i] = _bisect_characteristic(u0, xs[i], t, lo, hi)
    res = np.abs(u - u0(xs - u * t))
    if np.max(res) > 1e-9:
        raise NumericalError(f"characteristic solve failed, residual {np.max(res):.2e}")
    return u if np.ndim(x) else float(u[0])


# -- exact Riemann solver for the Sod tube -------------------------------------


def _pressure_fn(p, rho_k, p_k, a_k, g):
    if p > p_k:  # shock branch
        A = 2.0 / ((g + 1.0) * rho_k)
        B = (g - 1.0) / (g + 1.0) * p_k
        return (p - p_k) * math.sqrt(A / (p + B))
    return 2.0 * a_k / (g - 1.0) * ((p / p_k) ** ((g - 1.0) / (2.0 * g)) - 1.0)


def _pressure_fn_deriv(p, rho_k, p_k, a_k, g):
    if p > p_k:
        A = 2.0 / ((g + 1.0) * rho_k)
        B = (g - 1.0) / (g + 1.0) * p_k
        return math.sqrt(A / (p + B)) * (1.0 - 0.5 * (p - p_k) / (B + p))
    return ((p / p_k) ** (-(g + 1.0) / (2.0 * g))) / (rho_k * a_k)


_STAR_CACHE: dict = {}


def sod_star_state(gamma: float = 1.4):
    """(p*, u*) between the waves, by Newton on the pressure function."""
    key = round(gamma, 12)
    if key in _STAR_CACHE:
        return _STAR_CACHE[key]
    rl, ul, pl = _problems.SOD_LEFT
    rr, ur, pr = _problems.SOD_RIGHT
    al = math.sqrt(gamma * pl / rl)
    ar = math.sqrt(gamma * pr / rr)
    p = 0.5 * (pl + pr)
    for _ in range(200):
        f = _pressure_fn(p, rl, pl, al, gamma) + _pressure_fn(p, rr, pr, ar, gamma) + (ur - ul)
        df = _pressure_fn_deriv(p, rl, pl, al, gamma) + _pressure_fn_deriv(p, rr, pr, ar, gamma)
        p_new = p - f / df
        if p_new <= 0.0:
            p_new = 0.5 * p
        if abs(p_new - p) <= 1e-12 * max(p_new, 1.0):
            p = p_new
            break
        p = p_new
    else:
        raise NumericalError("pressure iteration did not converge")
    u = 0.5 * (ul + ur) + 0.5 * (
        _pressure_fn(p, rr, pr, ar, gamma) - _pressure_fn(p, rl, pl, al, gamma)
    )
    _STAR_CACHE[key] = (p, u)
    return p, u


def sod_exact(x, t: float, gamma: float = 1.4, x0: float = 1.0) -> np.ndarray:
    """Primitive (rho, u, p) of the exact Sod solution sampled at (x, t)."""
    if not t > 0.0:
        raise UsageError("sod_exact needs t > 0")
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    xi = (xs - x0) / t
    g = gamma
    rl, ul, pl = _problems.SOD_LEFT
    rr, ur, pr = _problems.SOD_RIGHT
    al = math.sqrt(g * pl / rl)
    ar = math.sqrt(g * pr / rr)
    ps, us = sod_star_state(g)

    rho = np.empty_like(xi)
    vel = np.empty_like(xi)
    prs = np.empty_like(xi)

    # Left of the contact: Sod has p* < pl, a left rarefaction.
    rho_sl = rl * (ps / pl) ** (1.0 / g)
    a_sl = al * (ps / pl) ** ((g - 1.0) / (2.0 * g))
    head = ul - al
    tail = us - a_sl
    # Right of the contact: p* > pr, a right shock.
    s_r = ur + ar * math.sqrt((g + 1.0) / (2.0 * g) * ps / pr + (g - 1.0) / (2.0 * g))
    beta = (g - 1.0) / (g + 1.0)
    rho_sr = rr * (ps / pr + beta) / (beta * ps / pr + 1.0)

    left = xi <= head
    fan = (xi > head) & (xi < tail)
    star_l = (xi >= tail) & (xi <= us)
    star_r = (xi > us) & (xi <= s_r)
    right = xi > s_r

    rho[left], vel[left], prs[left] = rl, ul, pl
    if np.any(fan):
        z = xi[fan]
        vfan = 2.0 / (g + 1.0) * (al + 0.5 * (g - 1.0) * ul + z)
        afan = 2.0 / (g + 1.0) * (al + 0.5 * (g - 1.0) * (ul - z))
        rho[fan] = rl * (afan / al) ** (2.0 / (g - 1.0))
        vel[fan] = vfan
        prs[fan] = pl * (afan / al) ** (2.0 * g / (g - 1.0))
    rho[star_l], vel[star_l], prs[star_l] = rho_sl, us, ps
    rho[star_r], vel[star_r], prs[star_r] = rho_sr, us, ps
    rho[right], vel[right], prs[right] = rr, ur, pr

    out = np.stack([rho, vel, prs], axis=-1)
    return out if np.ndim(x) else out[0]


# -- exact values in network space ---------------------------------------------


def exact_net_values(problem: _problems.Problem, xs, t: float):
    """Exact solution at time t in network space, or None if unavailable."""
    xs = np.asarray(xs, dtype=float).ravel()
    pid = problem.pid
    if pid in (_problems.ADVECTION_STEP, _problems.ADVECTION_SINE):
        return problem.bdy_net(xs, np.full(xs.shape, t))
    if pid == _problems.SOD:
        if t == 0.0:
            return problem.ic_net(xs)
        return sod_exact(xs, t, gamma=problem.law.gamma)
    vals = burgers_exact(pid, xs, t)
    if vals is None:
        return None
    return np.asarray(vals)[:, None]


# -- fine DG reference ----------------------------------------------------------


@dataclass
class ReferenceTable:
    mesh: dg_core.Mesh1D
    times: np.ndarray
    values: np.ndarray  # (n_times, n_cells, n_comp), conserved variables

    def at(self, xs, time_index: int) -> np.ndarray:
        """Piecewise-constant lookup at points xs for one stored time."""
        idx = self.mesh.locate(np.asarray(xs, dtype=float))
        return self.values[time_index][idx]


def _problem_bc(problem: _problems.Problem) -> dg_core.BoundaryKind:
    if problem.bc_kind == "periodic":
        return dg_core.PERIODIC
    if problem.bc_kind == "transmissive":
        return dg_core.TRANSMISSIVE
    return dg_core.dirichlet_exact(problem.bc_dirichlet_cons)


def _solve_table(problem, n_cells, times, cfl):
    mesh = dg_core.Mesh1D(problem.a, problem.length, n_cells)
    snaps = dg_core.solve(
        problem.law, mesh, problem.ic_cons, _problem_bc(problem), problem.T,
        cfl=cfl, degree=0, snapshot_times=times,
    )
    centers = mesh.centers()
    vals = np.stack([dg_core.evaluate_many(s, mesh, centers) for s in snaps])
    return mesh, vals


def _cache_key(problem, n_cells, times, cfl):
    desc = f"{problem.pid}|gamma={problem.law.gamma}|n={n_cells}|cfl={cfl}|" + ",".join(
        f"{t:.17g}" for t in times
    )
    return hashlib.sha256(desc.encode()).hexdigest()[:16]


def reference_fine(
    problem: _problems.Problem,
    times,
    n_cells: int = 4096,
    cfl: float = 0.3,
    cache_dir=None,
) -> ReferenceTable:
    """High-resolution q=0 reference with a self-convergence gate.

    The run aborts (ConfigError) unless the pooled relative L2 gap
    between the n_cells and n_cells/2 solutions is below 1e-2.
    """
    times = sorted(float(t) for t in times)
    mesh = dg_core.Mesh1D(problem.a, problem.length, n_cells)
    if cache_dir is not None:
        path = os.path.join(cache_dir, f"ref_{_cache_key(problem, n_cells, times, cfl)}.csv")
        if os.path.exists(path):
            return _load_reference_csv(path, problem, n_cells, times)
    _, vals = _solve_table(problem, n_cells, times, cfl)
    half_mesh, half_vals = _solve_table(problem, n_cells // 2, times, cfl)
    fine_on_half = np.stack(
        [ReferenceTable(mesh, np.asarray(times), vals).at(half_mesh.centers(), i) for i in range(len(times))]
    )
    gap = np.linalg.norm(fine_on_half - half_vals) / np.linalg.norm(fine_on_half)
    if gap >= 1e-2:
        raise ConfigError(
            f"fine reference for {problem.pid} failed self-convergence: gap {gap:.3e} >= 1e-2"
        )
    table = ReferenceTable(mesh, np.asarray(times), vals)
    if cache_dir is not None:
        os.makedirs(cache_dir, exist_ok=True)
        _write_reference_csv(path, table)
    return table


def _write_reference_csv(path, table: ReferenceTable):
    n_comp = table.values.shape[-1]
    header = "x,t," + ",".join(f"comp_{c}" for c in range(n_comp))
    lines = [header]
    centers = table.mesh.centers()
    for ti, t in enumerate(table.times):
        for x, row in zip(centers, table.values[ti]):
            lines.append(",".join([f"{x:.17g}", f"{t:.17g}"] + [f"{v:.17g}" for v in row]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _load_reference_csv(path, problem, n_cells, times):
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    n_comp = data.shape[1] - 2
    mesh = dg_core.Mesh1D(problem.a, problem.length, n_cells)
    vals = data[:, 2:].reshape(len(times), n_cells, n_comp)
    return ReferenceTable(mesh, np.asarray(times), vals)


# -- error metrics ---------------------------------------------------------------


@dataclass(frozen=True)
class EvalGrid:
    xs: np.ndarray
    times: np.ndarray

    def describe(self):
        return {
            "n_x": int(self.xs.size),
            "x_min": float(self.xs[0]),
            "x_max": float(self.xs[-1]),
            "times": [float(t) for t in self.times],
        }


def default_grid(problem: _problems.Problem, n_cells: int) -> EvalGrid:
    mesh = dg_core.Mesh1D(problem.a, problem.length, n_cells)
    return EvalGrid(mesh.centers(), np.linspace(0.0, problem.T, 11))


def relative_l2_values(pred: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Per-component ||pred - ref|| / ||ref|| over a flattened grid."""
    pred = np.asarray(pred, dtype=float).reshape(-1, pred.shape[-1])
    ref = np.asarray(ref, dtype=float).reshape(-1, ref.shape[-1])
    if pred.shape != ref.shape:
        raise UsageError("prediction/reference shape mismatch")
    norms = np.linalg.norm(ref, axis=0)
    if np.any(norms == 0.0):
        raise UsageError("reference is identically zero in some component")
    return np.linalg.norm(pred - ref, axis=0) / norms


def relative_l2(pred_fn, ref_fn, grid: EvalGrid) -> np.ndarray:
    """Spec-shaped wrapper: pred_fn/ref_fn map (xs, t) to (n, n_comp)."""
    if grid.xs.size == 0 or grid.times.size == 0:
        raise UsageError("empty evaluation grid")
    preds = np.stack([np.asarray(pred_fn(grid.xs, t), dtype=float) for t in grid.times])
    refs = np.stack([np.asarray(ref_fn(grid.xs, t), dtype=float) for t in grid.times])
    return relative_l2_values(preds, refs)


def reference_on_grid(problem: _problems.Problem, grid: EvalGrid, cache_dir=None) -> np.ndarray:
    """Reference values (network space) on the grid; exact where possible,
    fine DG elsewhere."""
    need_fine = any(exact_net_values(problem, grid.xs[:1], t) is None for t in grid.times)
    table = None
    if need_fine:
        table = reference_fine(problem, grid.times, cache_dir=cache_dir)
    out = np.empty((grid.times.size, grid.xs.size, problem.n_net_out))
    for ti, t in enumerate(grid.times):
        vals = exact_net_values(problem, grid.xs, t)
        if vals is None:
            cons = table.at(grid.xs, ti)
            vals = _law.conserved_to_primitive(problem.law, cons)
        out[ti] = vals
    return out


def network_on_grid(net, grid: EvalGrid) -> np.ndarray:
    from . import neural

    out = np.empty((grid.times.size, grid.xs.size, net.n_out))
    for ti, t in enumerate(grid.times):
        out[ti] = neural.predict(net, grid.xs, np.full(grid.xs.shape, t))
    return out


@dataclass
class ErrorReport:
    problem: str
    cells: int
    tasks: int
    seed: int
    boundaries: list
    errors: dict
    grid: dict
    wall_seconds: float
    method: str = "progressive"
    extra: dict = field(default_factory=dict)

    def to_json_dict(self):
        doc = {
            "problem": self.problem,
            "cells": self.cells,
            "tasks": self.tasks,
            "seed": self.seed,
            "boundaries": [float(b) for b in self.boundaries],
            "errors": {k: float(v) for k, v in self.errors.items()},
            "grid": self.grid,
            "method": self.method,
        }
        doc.update(self.extra)
        return doc


def network_errors(net, problem: _problems.Problem, n_cells: int, cache_dir=None) -> dict:
    grid = default_grid(problem, n_cells)
    ref = reference_on_grid(problem, grid, cache_dir=cache_dir)
    pred = network_on_grid(net, grid)
    errs = relative_l2_values(pred, ref)
    return dict(zip(problem.component_names, errs.tolist()))


def dg_baseline_errors(problem: _problems.Problem, n_cells: int, cfl: float = 0.3, cache_dir=None) -> dict:
    """First-order DG run evaluated on the default grid."""
    grid = default_grid(problem, n_cells)
    mesh = dg_core.Mesh1D(problem.a, problem.length, n_cells)
    snaps = dg_core.solve(
        problem.law, mesh, problem.ic_cons, _problem_bc(problem), problem.T,
        cfl=cfl, degree=0, snapshot_times=grid.times,
    )
    pred = np.stack(
        [_law.conserved_to_primitive(problem.law, dg_core.evaluate_many(s, mesh, grid.xs)) for s in snaps]
    )
    ref = reference_on_grid(problem, grid, cache_dir=cache_dir)
    errs = relative_l2_values(pred, ref)
    return dict(zip(problem.component_names, errs.tolist()))


# -- vanilla PINN baseline --------------------------------------------------------


def pinn_baseline(problem: _problems.Problem, config, cache_dir=None, log_path=None):
    """Single-network strong-form PINN with uniform loss weights.

    The PDE residual is evaluated in conserved variables through exact
    input derivatives of the network; optimization follows the same
    two-phase Adam then L-BFGS recipe as the main method.
    """
    from . import neural, optim

    t0 = time.perf_counter()
    net = neural.init_network(
        problem.n_net_out,
        [0.0, problem.T],
        config.seed,
        transform=problem.transform,
    )
    ev = neural.TapedNetEval(net, 1)
    plan = config.plan
    gamma = problem.law.gamma

    def draw(rng):
        xs = rng.uniform(problem.a, problem.b, plan.n_dg)
        ts = rng.uniform(0.0, problem.T, plan.n_dg)
        ic_x = rng.uniform(problem.a, problem.b, plan.n_ic)
        bdy_t = rng.uniform(0.0, problem.T, plan.n_bdy)
        bdy_x = np.where(rng.uniform(size=plan.n_bdy) < 0.5, problem.a, problem.b)
        return xs, ts, ic_x, bdy_x, bdy_t

    def residual_loss(u, ux, ut):
        from . import autodiff as ad

        if problem.law.kind == _law.ADVECTION:
            r = ut + problem.law.speed * ux
            return ad.vmean(r * r)
        if problem.law.kind == _law.BURGERS:
            r = ut + u * ux
            return ad.vmean(r * r)
        rho, v, p = u[:, 0:1], u[:, 1:2], u[:, 2:3]
        rho_x, v_x, p_x = ux[:, 0:1], ux[:, 1:2], ux[:, 2:3]
        rho_t, v_t, p_t = ut[:, 0:1], ut[:, 1:2], ut[:, 2:3]
        ene = p * (1.0 / (gamma - 1.0)) + 0.5 * rho * v * v
        ene_x = p_x * (1.0 / (gamma - 1.0)) + 0.5 * rho_x * v * v + rho * v * v_x
        ene_t = p_t * (1.0 / (gamma - 1.0)) + 0.5 * rho_t * v * v + rho * v * v_t
        r1 = rho_t + rho_x * v + rho * v_x
        r2 = (rho_t * v + rho * v_t) + (rho_x * v * v + 2.0 * rho * v * v_x + p_x)
        r3 = ene_t + v_x * (ene + p) + v * (ene_x + p_x)
        return ad.vmean(r1 * r1) + ad.vmean(r2 * r2) + ad.vmean(r3 * r3)

    state = {"samples": None}

    def objective(vec):
        from . import autodiff as ad

        neural.set_trainable(net.columns[0], vec)
        xs, ts, ic_x, bdy_x, bdy_t = state["samples"]
        ev.zero_grads()
        X = np.stack([xs, ts], axis=-1)
        u, ux, ut = ev.eval_with_input_grads(X)
        l_int = residual_loss(u, ux, ut)
        u_ic = ev.eval(np.stack([ic_x, np.zeros_like(ic_x)], axis=-1))
        d_ic = u_ic - problem.ic_net(ic_x)
        l_ic = ad.vmean(ad.vsum(d_ic * d_ic, axis=1))
        u_b = ev.eval(np.stack([bdy_x, bdy_t], axis=-1))
        d_b = u_b - problem.bdy_net(bdy_x, bdy_t)
        l_b = ad.vmean(ad.vsum(d_b * d_b, axis=1))
        total = l_int + l_ic + l_b  # uniform unit weights
        if not np.isfinite(total.v):
            raise NumericalError("non-finite PINN loss")
        ad.backward(total)
        return float(total.v), ev.grad_vector(), {
            "int": float(l_int.v), "ic": float(l_ic.v), "bdy": float(l_b.v),
        }

    vec = neural.get_trainable(net.columns[0])
    adam = optim.AdamState.like(vec, lr=config.train.adam_lr)
    log_rows = []
    for it in range(config.train.adam_iters):
        if it % optim.RESAMPLE_EVERY == 0:
            rng = np.random.default_rng([config.seed, 983, it // optim.RESAMPLE_EVERY])
            state["samples"] = draw(rng)
        val, grad, parts = objective(vec)
        vec = optim.adam_step(vec, grad, adam)
        if it % 100 == 0:
            log_rows.append((it, val, parts))
    rng = np.random.default_rng([config.seed, 983, 777])
    state["samples"] = draw(rng)
    lb = optim.LbfgsState(lr=config.train.lbfgs_lr)
    for it in range(config.train.lbfgs_iters):
        vec, accepted = optim.lbfgs_step(lambda v: objective(v)[:2], vec, lb)
        if not accepted and not lb.history:
            break
    neural.set_trainable(net.columns[0], vec)

    errors = network_errors(net, problem, config.n_cells, cache_dir=cache_dir)
    report = ErrorReport(
        problem=problem.pid,
        cells=config.n_cells,
        tasks=1,
        seed=config.seed,
        boundaries=[0.0, problem.T],
        errors=errors,
        grid=default_grid(problem, config.n_cells).describe(),
        wall_seconds=time.perf_counter() - t0,
        method="pinn",
    )
    if log_path is not None:
        with open(log_path, "w") as fh:
            fh.write("epoch,task,L_total,L_int,L_ic,L_bdy\n")
            for it, val, parts in log_rows:
                fh.write(f"{it},1,{val:.17g},{parts['int']:.17g},{parts['ic']:.17g},{parts['bdy']:.17g}\n")
    return net, report
