"""The five physics-guided loss terms and their shock machinery.

The structural loss advances the network's own point values one RK2 step
with local Lax-Friedrichs fluxes on the mesh stencil and penalizes the
forward error against the network at t + dt, scaled by 1/dt. Jumps are
detected by finite-difference probes; flagged points get a small binary
weight in the structural term and activate the Rankine-Hugoniot penalty.

All terms are assembled on the reverse-mode tape, so a single backward
pass yields the exact gradient of the composite objective with respect
to the trainable column.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import fourier, law as _law, neural
from .errors import NumericalError, TrainingError, UsageError

HALF_GRID = "half_grid"
RANDOM_IN_CELL = "random_in_cell"
AUTO = "auto"

# Resolution threshold of the placement rule: fine meshes sample cell
# centers, coarse meshes sample uniformly inside the domain.
HALF_GRID_MIN_CELLS = 128


@dataclass
class SamplePlan:
    n_dg: int = 1024
    n_bdy: int = 128
    n_ic: int = 256
    n_rh: int = 512
    n_sup: int = 512
    placement: str = AUTO
    seed: int = 7

    def __post_init__(self):
        if self.n_sup < 1 or self.n_sup & (self.n_sup - 1):
            raise UsageError(f"n_sup must be a power of two, got {self.n_sup}")
        if self.placement not in (HALF_GRID, RANDOM_IN_CELL, AUTO):
            raise UsageError(f"unknown placement {self.placement!r}")


@dataclass
class LossWeights:
    w_ic: float = 10.0
    w_bdy: float = 1.0
    w_dg: float = 1.0
    w_rh: float = 1.0
    w_sup: float = 1.0
    omega: float = 0.5

    def __post_init__(self):
        for name in ("w_ic", "w_bdy", "w_dg", "w_rh", "w_sup"):
            if getattr(self, name) < 0.0:
                raise UsageError(f"{name} must be non-negative")
        if not 0.0 <= self.omega <= 1.0:
            raise UsageError("omega must lie in [0, 1]")


@dataclass
class JumpConfig:
    eps: float | np.ndarray | None = None  # None: 5% of the sampled range, per component
    probe_dx: float = 0.01
    low_weight: float = 0.1

    def __post_init__(self):
        if self.eps is not None and np.any(np.asarray(self.eps) <= 0.0):
            raise UsageError("jump threshold eps must be positive")
        if not 0.0 < self.low_weight <= 1.0:
            raise UsageError("low_weight must lie in (0, 1]")
        if not self.probe_dx > 0.0:
            raise UsageError("probe_dx must be positive")


@dataclass
class SampleSet:
    ic_x: np.ndarray
    bdy_x: np.ndarray
    bdy_t: np.ndarray
    dg_x: np.ndarray
    dg_t: np.ndarray
    rh_x: np.ndarray
    rh_t: np.ndarray
    sup_x: np.ndarray | None = None
    sup_t: np.ndarray | None = None


def resolve_placement(plan: SamplePlan, n_cells: int) -> str:
    if plan.placement != AUTO:
        return plan.placement
    return HALF_GRID if n_cells >= HALF_GRID_MIN_CELLS else RANDOM_IN_CELL


def draw_samples(problem, boundaries, k, plan, dt, rng, placement, mesh=None) -> SampleSet:
    """Collocation points for task k; pseudo-label points are sorted by
    (t, x) so the DFT sequence ordering is deterministic."""
    a, b = problem.a, problem.b
    t_lo, t_hi = float(boundaries[k - 1]), float(boundaries[k])
    ic_x = rng.uniform(a, b, plan.n_ic)
    bdy_x = np.where(rng.uniform(size=plan.n_bdy) < 0.5, a, b).astype(float)
    bdy_t = rng.uniform(t_lo, t_hi, plan.n_bdy)
    if placement == HALF_GRID and mesh is not None:
        cells = rng.integers(0, mesh.n_cells, plan.n_dg)
        dg_x = mesh.centers()[cells]
    else:
        dg_x = rng.uniform(a, b, plan.n_dg)
    dg_t = rng.uniform(t_lo, max(t_lo, t_hi - dt), plan.n_dg)
    rh_x = rng.uniform(a, b, plan.n_rh)
    rh_t = rng.uniform(t_lo, t_hi, plan.n_rh)
    sup_x = sup_t = None
    if k > 1:
        sup_x = rng.uniform(a, b, plan.n_sup)
        sup_t = rng.uniform(float(boundaries[0]), t_lo, plan.n_sup)
        order = np.lexsort((sup_x, sup_t))
        sup_x, sup_t = sup_x[order], sup_t[order]
    return SampleSet(ic_x, bdy_x, bdy_t, dg_x, dg_t, rh_x, rh_t, sup_x, sup_t)


def rh_speed(du, df) -> float:
    """Least-squares scalar shock speed s = (du . df) / (du . du); for
    scalar laws this is the textbook flux-jump ratio."""
    du = np.asarray(du, dtype=float)
    df = np.asarray(df, dtype=float)
    return float(du @ df) / float(du @ du)


def rh_penalty(s, du, df) -> float:
    """Squared jump-relation residual ||s*du - df||^2."""
    r = s * np.asarray(du, dtype=float) - np.asarray(df, dtype=float)
    return float(r @ r)


def _mse_rows(diff: ad.Var) -> ad.Var:
    """Mean over rows of the squared row norm."""
    return ad.vsum(diff * diff) * (1.0 / diff.v.shape[0])


def _to_cons_taped(law, prim: ad.Var) -> ad.Var:
    if law.kind != _law.EULER:
        return prim
    rho = prim[..., 0:1]
    v = prim[..., 1:2]
    p = prim[..., 2:3]
    ene = p * (1.0 / (law.gamma - 1.0)) + 0.5 * rho * v * v
    return ad.concat([rho, rho * v, ene], axis=-1)


def _flux_taped(law, u: ad.Var) -> ad.Var:
    if law.kind == _law.ADVECTION:
        return law.speed * u
    if law.kind == _law.BURGERS:
        return 0.5 * u * u
    rho = ad.maximum(u[..., 0:1], 1e-12)
    m = u[..., 1:2]
    ene = u[..., 2:3]
    v = m / rho
    p = (law.gamma - 1.0) * (ene - 0.5 * m * v)
    return ad.concat([m, m * v + p, v * (ene + p)], axis=-1)


def _wave_speed_taped(law, u: ad.Var) -> ad.Var:
    if law.kind == _law.ADVECTION:
        return ad.const(np.full(u.v.shape[:-1] + (1,), abs(law.speed)))
    if law.kind == _law.BURGERS:
        return ad.absolute(u)
    rho = ad.maximum(u[..., 0:1], 1e-12)
    m = u[..., 1:2]
    ene = u[..., 2:3]
    v = m / rho
    p = ad.maximum((law.gamma - 1.0) * (ene - 0.5 * m * v), 1e-14)
    return ad.absolute(v) + ad.sqrt(law.gamma * p / rho)


def _lf_taped(law, ul: ad.Var, ur: ad.Var) -> ad.Var:
    # Local Lax-Friedrichs: alpha from the two states it joins.
    alpha = ad.maximum(_wave_speed_taped(law, ul), _wave_speed_taped(law, ur))
    return 0.5 * (_flux_taped(law, ul) + _flux_taped(law, ur) - alpha * (ur - ul))


def _euler_physical_mask(law, vals: np.ndarray) -> np.ndarray:
    rho = vals[..., 0]
    with np.errstate(all="ignore"):
        p = (law.gamma - 1.0) * (vals[..., 2] - 0.5 * vals[..., 1] ** 2 / np.where(rho > 0, rho, 1.0))
    return (rho > 0.0) & (p > 0.0)


class LossContext:
    """Binds one training task's loss evaluation.

    Holds the sample set, the frozen-column activation caches, and the
    taped evaluator of the trainable column; `evaluate` returns the
    weighted total, its gradient, and the per-term breakdown.
    """

    def __init__(self, net, k, problem, plan, weights=None, jump=None, mesh=None, dt=None):
        if not 1 <= k <= len(net.columns):
            raise UsageError(f"no column {k} in the network")
        self.net = net
        self.k = k
        self.problem = problem
        self.plan = plan
        self.weights = weights or LossWeights()
        self.mesh = mesh
        self.dt = dt
        if jump is None:
            probe = (mesh.h / 2.0) if mesh is not None else 0.01
            jump = JumpConfig(probe_dx=probe)
        self.jump = jump
        self.eps = None if jump.eps is None else np.atleast_1d(np.asarray(jump.eps, dtype=float))
        n_cells = mesh.n_cells if mesh is not None else 0
        self.placement = resolve_placement(plan, n_cells)
        self.ev = neural.TapedNetEval(net, k)
        self.samples: SampleSet | None = None
        self.skip_fraction = 0.0

    # -- sampling and caches -------------------------------------------------

    def resample(self, epoch: int) -> None:
        rng = np.random.default_rng([self.plan.seed, self.k, 211, epoch])
        dt = self.dt if self.dt is not None else 0.0
        self.set_samples(
            draw_samples(
                self.problem, self.net.task_boundaries, self.k, self.plan, dt, rng,
                self.placement, mesh=self.mesh,
            )
        )

    def set_samples(self, samples: SampleSet) -> None:
        self.samples = samples
        net, k, prob = self.net, self.k, self.problem
        s = samples
        t_if = float(net.task_boundaries[k - 1])

        segs = [np.stack([s.ic_x, np.full_like(s.ic_x, t_if)], axis=-1),
                np.stack([s.bdy_x, s.bdy_t], axis=-1)]
        self._seg_slices = {}
        pos = s.ic_x.size + s.bdy_x.size
        self._seg_slices["ic"] = slice(0, s.ic_x.size)
        self._seg_slices["bdy"] = slice(s.ic_x.size, pos)

        if self.mesh is not None and self.dt is not None:
            h = self.mesh.h
            offs = np.arange(-2, 3) * h
            sx = s.dg_x[:, None] + offs[None, :]
            st = np.broadcast_to(s.dg_t[:, None], sx.shape)
            mapped, outside, const_vals = self._map_coords(sx, st)
            self._dg_outside = outside
            self._dg_const = const_vals
            flat = np.stack([mapped.ravel(), st.ravel()], axis=-1)
            segs.append(flat)
            self._seg_slices["dg_sten"] = slice(pos, pos + flat.shape[0])
            pos += flat.shape[0]
            tgt = np.stack([s.dg_x, s.dg_t + self.dt], axis=-1)
            segs.append(tgt)
            self._seg_slices["dg_tgt"] = slice(pos, pos + tgt.shape[0])
            pos += tgt.shape[0]

        probe = self.jump.probe_dx
        rl = np.stack([np.clip(s.rh_x - probe, prob.a, prob.b), s.rh_t], axis=-1)
        rr = np.stack([np.clip(s.rh_x + probe, prob.a, prob.b), s.rh_t], axis=-1)
        segs += [rl, rr]
        self._seg_slices["rh_l"] = slice(pos, pos + rl.shape[0])
        pos += rl.shape[0]
        self._seg_slices["rh_r"] = slice(pos, pos + rr.shape[0])
        pos += rr.shape[0]

        if k > 1:
            sup = np.stack([s.sup_x, s.sup_t], axis=-1)
            segs.append(sup)
            self._seg_slices["sup"] = slice(pos, pos + sup.shape[0])
            pos += sup.shape[0]

        self._X = np.concatenate(segs, axis=0)
        self._frozen = neural.frozen_states(net, self._X, k)

        # Probe points for the binary jump weight of the structural term.
        jp_l = np.stack([np.clip(s.dg_x - probe, prob.a, prob.b), s.dg_t], axis=-1)
        jp_r = np.stack([np.clip(s.dg_x + probe, prob.a, prob.b), s.dg_t], axis=-1)
        self._probe_X = np.concatenate([jp_l, jp_r], axis=0)
        self._probe_frozen = neural.frozen_states(net, self._probe_X, k)
        self._dg_weights = None

        # Targets from the frozen predecessor column (or the exact IC).
        if k == 1:
            self._ic_target = prob.ic_net(s.ic_x)
        else:
            Xi = np.stack([s.ic_x, np.full_like(s.ic_x, t_if)], axis=-1)
            self._ic_target = neural.forward_batch(net, Xi[:, 0], Xi[:, 1], k - 1)
        self._bdy_target = prob.bdy_net(s.bdy_x, s.bdy_t)
        if k > 1:
            self._sup_target = neural.forward_batch(net, s.sup_x, s.sup_t, k - 1)
        self._update_eps()

    def _map_coords(self, sx, st):
        """Map stencil coordinates through the boundary condition."""
        prob = self.problem
        if prob.bc_kind == "periodic":
            mapped = prob.a + np.mod(sx - prob.a, prob.length)
            return mapped, None, None
        mapped = np.clip(sx, prob.a, prob.b)
        if prob.bc_kind == "transmissive":
            return mapped, None, None
        outside = (sx < prob.a) | (sx > prob.b)
        const_vals = np.zeros(sx.shape + (prob.n_net_out,))
        if np.any(outside):
            const_vals[outside] = prob.bdy_net(sx[outside], st[outside])
        return mapped, outside, const_vals

    def _update_eps(self):
        if self.jump.eps is not None:
            return
        pool = [self._ic_target]
        vals = neural.forward_from_frozen(
            self.net, self.k,
            self._X[self._seg_slices["dg_sten"]] if "dg_sten" in self._seg_slices else self._X,
            self._slice_frozen("dg_sten") if "dg_sten" in self._seg_slices else self._frozen,
        )
        pool.append(vals)
        pool = np.concatenate(pool, axis=0)
        span = pool.max(axis=0) - pool.min(axis=0)
        self.eps = np.maximum(0.05 * span, 1e-12)

    def _slice_frozen(self, name):
        sl = self._seg_slices[name]
        return [[h[sl] for h in states] for states in self._frozen]

    # -- term evaluation ------------------------------------------------------

    def _terms(self):
        self.ev.zero_grads()
        out = self.ev.eval(self._X, frozen_states=self._frozen)

        terms = {}
        d_ic = out[self._seg_slices["ic"]] - self._ic_target
        terms["ic"] = _mse_rows(d_ic)
        d_bdy = out[self._seg_slices["bdy"]] - self._bdy_target
        terms["bdy"] = _mse_rows(d_bdy)

        if "dg_sten" in self._seg_slices:
            terms["dg"] = self._dg_term(out)
        terms["rh"] = self._rh_term(out)
        if self.k > 1:
            terms["sup"] = self._sup_term(out)
        return terms

    def _dg_term(self, out):
        law = self.problem.law
        s = self.samples
        n = s.dg_x.size
        h, dt = self.mesh.h, self.dt
        prim = ad.reshape(out[self._seg_slices["dg_sten"]], (n, 5, self.net.n_out))
        if self._dg_outside is not None and np.any(self._dg_outside):
            prim = ad.where_const(self._dg_outside[:, :, None], ad.const(self._dg_const), prim)
        u = _to_cons_taped(law, prim)
        tgt = _to_cons_taped(law, out[self._seg_slices["dg_tgt"]])

        F = _lf_taped(law, u[:, 0:4, :], u[:, 1:5, :])
        k1 = (F[:, 0:3, :] - F[:, 1:4, :]) * (1.0 / h)
        ustar = u[:, 1:4, :] + dt * k1
        if law.kind == _law.EULER:
            keep = np.all(_euler_physical_mask(law, ustar.v), axis=1)
        else:
            keep = np.ones(n, dtype=bool)
        self.skip_fraction = 1.0 - keep.mean()
        if self.skip_fraction > 0.10:
            raise TrainingError(
                f"{self.skip_fraction:.1%} of structural-loss samples hit non-physical states",
                task=self.k,
            )
        G = _lf_taped(law, ustar[:, 0:2, :], ustar[:, 1:3, :])
        k2 = ad.reshape((G[:, 0:1, :] - G[:, 1:2, :]) * (1.0 / h), (n, u.v.shape[-1]))
        uh = u[:, 2, :] + (0.5 * dt) * (ad.reshape(k1[:, 1:2, :], (n, u.v.shape[-1])) + k2)
        r = (tgt - uh) * (1.0 / dt)
        w = self._jump_weights() * keep
        kept = max(int(keep.sum()), 1)
        return ad.vsum(ad.const(w[:, None]) * r * r) * (1.0 / kept)

    def _jump_weights(self) -> np.ndarray:
        # Refreshed once per sample epoch, together with the threshold eps.
        if self._dg_weights is None:
            vals = neural.forward_from_frozen(self.net, self.k, self._probe_X, self._probe_frozen)
            n = self.samples.dg_x.size
            jump = np.abs(vals[:n] - vals[n:])
            flagged = np.any(jump > self.eps[None, :], axis=1)
            self._dg_weights = np.where(flagged, self.jump.low_weight, 1.0)
        return self._dg_weights

    def _rh_term(self, out):
        law = self.problem.law
        ul = _to_cons_taped(law, out[self._seg_slices["rh_l"]])
        ur = _to_cons_taped(law, out[self._seg_slices["rh_r"]])
        du = ul - ur
        df = _flux_taped(law, ul) - _flux_taped(law, ur)
        num = ad.vsum(du * df, axis=1, keepdims=True)
        den = ad.maximum(ad.vsum(du * du, axis=1, keepdims=True), 1e-30)
        speed = num / den
        resid = speed * du - df
        gate = np.any(np.abs(du.v) > self.eps[None, :], axis=1)
        contrib = ad.vsum(resid * resid, axis=1)
        return ad.vsum(contrib * ad.const(gate.astype(float))) * (1.0 / self.samples.rh_x.size)

    def _sup_term(self, out):
        n = self.samples.sup_x.size
        diff = out[self._seg_slices["sup"]] - self._sup_target
        l_tmp = _mse_rows(diff)
        energy = sum(
            fourier.dft_energy(diff.v[:, c]) for c in range(diff.v.shape[1])
        ) / n
        # Adjoint of (1/n)*sum_c ||DFT diff_c||^2 is exactly 2*diff (Parseval).
        l_freq = ad.Var(np.asarray(energy), parents=(diff,), bwd=(lambda g: g * 2.0 * diff.v,))
        om = self.weights.omega
        self._last_freq = float(energy)
        self._last_tmp = float(l_tmp.v)
        return om * l_tmp + (1.0 - om) * l_freq

    def evaluate(self, vec=None, want_grad=True):
        """(total, grad, breakdown) at the current or given parameters."""
        if vec is not None:
            neural.set_trainable(self.net.columns[self.k - 1], vec)
        if self.samples is None:
            self.resample(0)
        terms = self._terms()
        for name, term in terms.items():
            if not np.isfinite(term.v):
                raise NumericalError(f"loss term {name!r} is not finite")
        w = self.weights
        total = (
            w.w_ic * terms["ic"]
            + w.w_bdy * terms["bdy"]
            + w.w_dg * terms.get("dg", ad.const(0.0))
            + w.w_rh * terms["rh"]
        )
        if self.k > 1:
            total = total + w.w_sup * terms["sup"]
        breakdown = {name: float(term.v) for name, term in terms.items()}
        breakdown.setdefault("dg", 0.0)
        breakdown.setdefault("sup", 0.0)
        breakdown["sup_gated"] = self.k == 1
        breakdown["total"] = float(total.v)
        grad = None
        if want_grad:
            ad.backward(total)
            grad = self.ev.grad_vector()
            if not np.all(np.isfinite(grad)):
                raise NumericalError("non-finite gradient in total loss")
        return float(total.v), grad, breakdown


# -- public per-term operations -------------------------------------------------


def _simple_ctx(net, k, problem, plan, weights=None, jump=None, mesh=None, dt=None):
    ctx = LossContext(net, k, problem, plan, weights=weights, jump=jump, mesh=mesh, dt=dt)
    ctx.resample(0)
    return ctx


def ic_loss(net, k, problem, plan) -> float:
    ctx = _simple_ctx(net, k, problem, plan)
    return ctx._terms()["ic"].v.item()


def bdy_loss(net, k, problem, plan) -> float:
    ctx = _simple_ctx(net, k, problem, plan)
    return ctx._terms()["bdy"].v.item()


def jump_weight(net, k, x, t, cfg: JumpConfig, problem) -> float:
    """Binary weight at one point: low_weight over a detected jump, else 1."""
    if cfg.eps is None:
        raise UsageError("jump_weight needs an explicit eps")
    eps = np.atleast_1d(np.asarray(cfg.eps, dtype=float))
    xl = np.clip(x - cfg.probe_dx, problem.a, problem.b)
    xr = np.clip(x + cfg.probe_dx, problem.a, problem.b)
    vals = neural.forward_batch(net, np.array([xl, xr]), np.array([t, t]), k)
    jump = np.abs(vals[0] - vals[1])
    return cfg.low_weight if np.any(jump > eps) else 1.0


def dg_loss(net, k, problem, mesh, plan, cfg, dt) -> float:
    ctx = _simple_ctx(net, k, problem, plan, jump=cfg, mesh=mesh, dt=dt)
    return ctx._terms()["dg"].v.item()


def rh_loss(net, k, problem, plan, cfg) -> float:
    ctx = _simple_ctx(net, k, problem, plan, jump=cfg)
    return ctx._terms()["rh"].v.item()


def sup_loss(net, k, problem, plan, weights) -> float:
    if k == 1:
        raise UsageError("the pseudo-label loss is gated off for the first task")
    ctx = _simple_ctx(net, k, problem, plan, weights=weights)
    return ctx._terms()["sup"].v.item()


def total_loss(net, k, problem, mesh, plan, weights, cfg, dt):
    ctx = _simple_ctx(net, k, problem, plan, weights=weights, jump=cfg, mesh=mesh, dt=dt)
    value, _, breakdown = ctx.evaluate(want_grad=False)
    return value, breakdown


def combine_terms(terms: dict, weights: LossWeights, k: int) -> float:
    """Weighted aggregation used by the composite objective."""
    total = (
        weights.w_ic * terms.get("ic", 0.0)
        + weights.w_bdy * terms.get("bdy", 0.0)
        + weights.w_dg * terms.get("dg", 0.0)
        + weights.w_rh * terms.get("rh", 0.0)
    )
    if k > 1:
        total += weights.w_sup * terms.get("sup", 0.0)
    return total
