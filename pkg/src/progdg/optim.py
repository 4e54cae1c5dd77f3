"""Adam, L-BFGS, and the task-sequential two-phase training loop.

Each task trains the newest column with Adam on resampled collocation
sets, then refines with L-BFGS on one fixed sample set (stochastic
resampling would invalidate the curvature pairs). Earlier columns stay
bit-identical throughout.
"""
from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import dg_core, losses, neural, reference
from .errors import NumericalError, ProgdgError, TrainingError, UsageError

RESAMPLE_EVERY = 1000
LOG_EVERY = 100


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def like(cls, params, lr=1e-3):
        return cls(m=np.zeros_like(params), v=np.zeros_like(params), lr=lr)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState) -> np.ndarray:
    """Standard bias-corrected Adam update; returns the new parameters."""
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise UsageError("parameter/gradient/moment shapes disagree")
    if not np.all(np.isfinite(grads)):
        raise NumericalError("NaN or Inf gradient passed to adam_step")
    state.step += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = state.m / (1.0 - state.beta1 ** state.step)
    v_hat = state.v / (1.0 - state.beta2 ** state.step)
    return params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


@dataclass
class LbfgsState:
    lr: float = 1e-2
    max_hist: int = 10
    history: list = field(default_factory=list)  # [(s, y)]
    _fresh: bool = True

    def clear(self):
        self.history.clear()
        self._fresh = True


ARMIJO_C1 = 1e-4
MAX_HALVINGS = 20
CURVATURE_FLOOR = 1e-12


def _two_loop(grad, history):
    q = grad.copy()
    alphas = []
    for s, y in reversed(history):
        rho = 1.0 / float(s @ y)
        a = rho * float(s @ q)
        alphas.append((a, rho, s, y))
        q -= a * y
    if history:
        s, y = history[-1]
        q *= float(s @ y) / float(y @ y)
    for (a, rho, s, y) in reversed(alphas):
        b = rho * float(y @ q)
        q += (a - b) * s
    return -q


def lbfgs_step(loss_fn, params: np.ndarray, state: LbfgsState):
    """One L-BFGS iteration with Armijo backtracking.

    loss_fn(params) -> (value, gradient) must be deterministic on a fixed
    sample set. The first trial step after a (re)initialized history is
    scaled by state.lr; with curvature pairs in place the natural unit
    step is tried first. Returns (new_params, accepted); a failed line
    search rejects the step and clears the history.
    """
    f0, g0 = loss_fn(params)
    if not np.all(np.isfinite(g0)):
        raise NumericalError("non-finite gradient at the L-BFGS base point")
    gnorm = float(np.linalg.norm(g0))
    if gnorm == 0.0:
        return params, False
    d = _two_loop(g0, state.history)
    slope = float(g0 @ d)
    if slope >= 0.0:  # not a descent direction; restart from steepest descent
        state.clear()
        d = -g0
        slope = -gnorm * gnorm
    t = state.lr if state._fresh else 1.0
    for _ in range(MAX_HALVINGS + 1):
        try:
            f1, g1 = loss_fn(params + t * d)
        except (ProgdgError, FloatingPointError):
            f1, g1 = np.inf, None
        if np.isfinite(f1) and f1 <= f0 + ARMIJO_C1 * t * slope:
            s = t * d
            y = g1 - g0
            sy = float(s @ y)
            if sy > CURVATURE_FLOOR:
                state.history.append((s, y))
                if len(state.history) > state.max_hist:
                    state.history.pop(0)
            state._fresh = False
            return params + t * d, True
        t *= 0.5
    state.clear()
    return params, False


@dataclass
class TrainConfig:
    adam_iters: int = 20000
    adam_lr: float = 1e-3
    lbfgs_iters: int = 1000
    lbfgs_lr: float = 1e-2

    def __post_init__(self):
        if self.adam_iters < 0 or self.lbfgs_iters < 0:
            raise UsageError("iteration counts must be non-negative")


@dataclass
class TaskLog:
    task: int
    rows: list = field(default_factory=list)  # (epoch, breakdown dict)
    interface_x: np.ndarray | None = None
    interface_values: np.ndarray | None = None

    def final_loss(self):
        return self.rows[-1][1]["total"] if self.rows else float("nan")


def train_task(net, k, problem, plan, weights, config, mesh=None, dt=None, jump=None) -> TaskLog:
    """Two-phase optimization of column k on its time subinterval."""
    frozen_before = neural.params_digest(net, upto=k - 1)
    ctx = losses.LossContext(net, k, problem, plan, weights=weights, jump=jump, mesh=mesh, dt=dt)
    col = net.columns[k - 1]
    vec = neural.get_trainable(col)
    log = TaskLog(task=k)

    try:
        adam = AdamState.like(vec, lr=config.adam_lr)
        for it in range(config.adam_iters):
            if it % RESAMPLE_EVERY == 0:
                ctx.resample(it // RESAMPLE_EVERY)
            value, grad, breakdown = ctx.evaluate(vec)
            vec = adam_step(vec, grad, adam)
            if it % LOG_EVERY == 0:
                log.rows.append((it, breakdown))

        # L-BFGS refines on one fixed, freshly drawn sample set.
        ctx.resample(config.adam_iters // RESAMPLE_EVERY + 1)
        lb = LbfgsState(lr=config.lbfgs_lr)
        for it in range(config.lbfgs_iters):
            vec, accepted = lbfgs_step(lambda v: ctx.evaluate(v)[:2], vec, lb)
            if it % LOG_EVERY == 0 or it == config.lbfgs_iters - 1:
                _, _, breakdown = ctx.evaluate(vec, want_grad=False)
                log.rows.append((config.adam_iters + it, breakdown))
            if not accepted and not lb.history:
                break
        neural.set_trainable(col, vec)
    except (NumericalError, TrainingError) as exc:
        raise TrainingError(str(exc), task=k) from exc

    if neural.params_digest(net, upto=k - 1) != frozen_before:
        raise TrainingError("frozen columns were modified", task=k)

    # Interface predictions initialize the next task's targets.
    t_k = float(net.task_boundaries[k])
    xs = np.linspace(problem.a, problem.b, 257)
    log.interface_x = xs
    log.interface_values = neural.forward_batch(net, xs, np.full_like(xs, t_k), k)
    return log


def uniform_boundaries(T: float, m: int) -> np.ndarray:
    return np.linspace(0.0, T, m + 1)


def run_progressive(problem, config, outdir=None, cache_dir=None):
    """Algorithm loop: partition time, train columns in sequence, report.

    `config` is an ExperimentConfig; returns (network, ErrorReport).
    """
    t_start = time.perf_counter()
    mesh = dg_core.Mesh1D(problem.a, problem.length, config.n_cells)
    boundaries = uniform_boundaries(problem.T, config.tasks)
    net = neural.init_network(
        problem.n_net_out, boundaries, config.seed, transform=problem.transform
    )
    dt = config.resolved_dg_dt(problem, mesh)
    jump = losses.JumpConfig(
        eps=config.jump_eps, probe_dx=config.resolved_probe_dx(mesh)
    )
    logs = []
    for k in range(1, config.tasks + 1):
        if k > 1:
            neural.add_column(net)
        log = train_task(
            net, k, problem, config.plan, config.weights, config.train,
            mesh=mesh, dt=dt, jump=jump,
        )
        logs.append(log)
        if outdir is not None:
            neural.save_network(
                net,
                os.path.join(outdir, f"task_{k}.ckpt"),
                meta=checkpoint_meta(problem, config),
            )

    errors = reference.network_errors(net, problem, config.n_cells, cache_dir=cache_dir)
    grid = reference.default_grid(problem, config.n_cells)
    extra = {}
    if problem.law.kind == "euler":
        extra["gamma"] = problem.law.gamma  # assumed value, the source never states it
    report = reference.ErrorReport(
        problem=problem.pid,
        cells=config.n_cells,
        tasks=config.tasks,
        seed=config.seed,
        boundaries=[float(b) for b in boundaries],
        errors=errors,
        grid=grid.describe(),
        wall_seconds=time.perf_counter() - t_start,
        method="progressive",
        extra=extra,
    )
    if outdir is not None:
        write_loss_log(os.path.join(outdir, "loss_log.csv"), logs)
    return net, report, logs


def checkpoint_meta(problem, config) -> dict:
    return {
        "problem": problem.pid,
        "n_cells": config.n_cells,
        "tasks": config.tasks,
        "seed": config.seed,
        "T": problem.T,
    }


def write_loss_log(path, logs) -> None:
    lines = ["epoch,task,L_total,L_ic,L_bdy,L_dg,L_rh,L_sup"]
    for log in logs:
        for epoch, bd in log.rows:
            lines.append(
                f"{epoch},{log.task},{bd['total']:.17g},{bd['ic']:.17g},"
                f"{bd['bdy']:.17g},{bd['dg']:.17g},{bd['rh']:.17g},{bd['sup']:.17g}"
            )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
