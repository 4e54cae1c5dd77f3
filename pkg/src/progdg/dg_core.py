"""Discontinuous Galerkin core on a uniform 1D mesh.

Modal coefficients are stored against the orthonormal Legendre basis
    phi_0 = 1/sqrt(h),  phi_1 = (2*sqrt(3)/h^{3/2}) * (x - x_center),
so the mass matrix is the identity and no linear solve is needed.
Degrees q in {0, 1} are supported; q=0 is the first-order finite-volume
scheme used for shocked runs and q=1 is reserved for smooth data
(no slope limiter is applied).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import law as _law
from .errors import NonPhysicalStateError, SolveError, UsageError

# 5-point Gauss-Legendre rule on [-1, 1]; exact through degree 9.
_GL_A = math.sqrt(5.0 - 2.0 * math.sqrt(10.0 / 7.0)) / 3.0
_GL_B = math.sqrt(5.0 + 2.0 * math.sqrt(10.0 / 7.0)) / 3.0
GL5_NODES = np.array([-_GL_B, -_GL_A, 0.0, _GL_A, _GL_B])
GL5_WEIGHTS = np.array(
    [
        (322.0 - 13.0 * math.sqrt(70.0)) / 900.0,
        (322.0 + 13.0 * math.sqrt(70.0)) / 900.0,
        128.0 / 225.0,
        (322.0 + 13.0 * math.sqrt(70.0)) / 900.0,
        (322.0 - 13.0 * math.sqrt(70.0)) / 900.0,
    ]
)


@dataclass(frozen=True)
class Mesh1D:
    a: float
    length: float
    n_cells: int

    def __post_init__(self):
        if self.n_cells < 2:
            raise UsageError(f"need at least 2 cells, got {self.n_cells}")
        if not self.length > 0.0:
            raise UsageError("mesh length must be positive")

    @property
    def h(self) -> float:
        return self.length / self.n_cells

    @property
    def b(self) -> float:
        return self.a + self.length

    def centers(self) -> np.ndarray:
        return self.a + (np.arange(self.n_cells) + 0.5) * self.h

    def edges(self) -> np.ndarray:
        return self.a + np.arange(self.n_cells + 1) * self.h

    def locate(self, x) -> np.ndarray:
        """Cell index for each x; a point on an interior interface belongs
        to the cell on its left."""
        x = np.asarray(x, dtype=float)
        if np.any(x < self.a) or np.any(x > self.b):
            raise UsageError("evaluation point outside the mesh")
        idx = np.ceil((x - self.a) / self.h).astype(int) - 1
        return np.clip(idx, 0, self.n_cells - 1)


@dataclass
class BoundaryKind:
    kind: str  # "periodic" | "transmissive" | "dirichlet"
    u_bdy: Optional[Callable] = None  # (x, t) -> state, dirichlet only

    def __post_init__(self):
        if self.kind not in ("periodic", "transmissive", "dirichlet"):
            raise UsageError(f"unknown boundary kind: {self.kind!r}")
        if self.kind == "dirichlet" and self.u_bdy is None:
            raise UsageError("dirichlet boundary needs a u_bdy(x, t) function")


PERIODIC = BoundaryKind("periodic")
TRANSMISSIVE = BoundaryKind("transmissive")


def dirichlet_exact(u_bdy: Callable) -> BoundaryKind:
    return BoundaryKind("dirichlet", u_bdy)


@dataclass
class DGState:
    degree: int
    coeffs: np.ndarray  # (n_cells, degree + 1, n_comp)
    time: float = 0.0

    def copy(self) -> "DGState":
        return DGState(self.degree, self.coeffs.copy(), self.time)


def _as_comp(vals, n_pts):
    """Coerce user IC output to shape (n_pts, n_comp)."""
    vals = np.asarray(vals, dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    if vals.shape[0] != n_pts:
        raise UsageError("initial-condition function returned a bad shape")
    return vals


def project_ic(u0: Callable, mesh: Mesh1D, degree: int) -> DGState:
    """L2-project u0 onto the modal basis with 5-point Gauss quadrature."""
    if degree not in (0, 1):
        raise UsageError(f"degree must be 0 or 1, got {degree}")
    h = mesh.h
    centers = mesh.centers()
    xq = centers[:, None] + 0.5 * h * GL5_NODES[None, :]  # (n, 5)
    vals = _as_comp(u0(xq.ravel()), xq.size).reshape(mesh.n_cells, 5, -1)
    n_comp = vals.shape[-1]
    coeffs = np.zeros((mesh.n_cells, degree + 1, n_comp))
    phi0 = 1.0 / math.sqrt(h)
    w = GL5_WEIGHTS[None, :, None] * (0.5 * h)
    coeffs[:, 0, :] = np.sum(w * vals * phi0, axis=1)
    if degree == 1:
        phi1 = (2.0 * math.sqrt(3.0) / h ** 1.5) * (xq - centers[:, None])
        coeffs[:, 1, :] = np.sum(w * vals * phi1[:, :, None], axis=1)
    return DGState(degree, coeffs, 0.0)


def _edge_values(state: DGState, h: float):
    """Left- and right-edge traces of every cell, shape (n_cells, n_comp)."""
    c = state.coeffs
    phi0 = 1.0 / math.sqrt(h)
    if state.degree == 0:
        v = c[:, 0, :] * phi0
        return v, v
    s3 = math.sqrt(3.0) / math.sqrt(h)
    left = c[:, 0, :] * phi0 - c[:, 1, :] * s3
    right = c[:, 0, :] * phi0 + c[:, 1, :] * s3
    return left, right


def _interface_traces(law, state, mesh, bc):
    """Traces (u_minus, u_plus) at the n_cells+1 interfaces, ghosts applied."""
    left_edge, right_edge = _edge_values(state, mesh.h)
    n = mesh.n_cells
    n_comp = state.coeffs.shape[-1]
    um = np.empty((n + 1, n_comp))
    up = np.empty((n + 1, n_comp))
    um[1:] = right_edge
    up[:-1] = left_edge
    if bc.kind == "periodic":
        um[0] = right_edge[-1]
        up[-1] = left_edge[0]
    elif bc.kind == "transmissive":
        um[0] = left_edge[0]
        up[-1] = right_edge[-1]
    else:
        um[0] = np.atleast_1d(np.asarray(bc.u_bdy(mesh.a, state.time), dtype=float))
        up[-1] = np.atleast_1d(np.asarray(bc.u_bdy(mesh.b, state.time), dtype=float))
    return um, up


def _rhs_with_fluxes(law, mesh, state, bc):
    um, up = _interface_traces(law, state, mesh, bc)
    if law.kind == _law.EULER and not (np.all(_law.is_physical(law, um)) and np.all(_law.is_physical(law, up))):
        bad = um[~_law.is_physical(law, um)]
        if bad.size == 0:
            bad = up[~_law.is_physical(law, up)]
        raise NonPhysicalStateError(bad.reshape(-1, 3)[0], "step rejected")
    # Local Lax-Friedrichs: alpha per interface from the two adjacent traces.
    alpha = np.maximum(_law.wave_speed(law, um, check=False), _law.wave_speed(law, up, check=False))
    if law.kind == _law.EULER:
        alpha = alpha[:, None]
    fhat = _law.lf_flux(law, um, up, alpha)
    if law.kind != _law.EULER and fhat.ndim == 1:
        fhat = fhat[:, None]

    h = mesh.h
    phi0 = 1.0 / math.sqrt(h)
    rate = np.zeros_like(state.coeffs)
    rate[:, 0, :] = (fhat[:-1] - fhat[1:]) * phi0
    if state.degree == 1:
        # Volume term: int f(u_h) phi_1' dx with phi_1' = 2*sqrt(3)/h^{3/2}.
        centers = mesh.centers()
        xq = centers[:, None] + 0.5 * h * GL5_NODES[None, :]
        phi1 = (2.0 * math.sqrt(3.0) / h ** 1.5) * (xq - centers[:, None])
        uq = (
            state.coeffs[:, None, 0, :] * phi0
            + state.coeffs[:, None, 1, :] * phi1[:, :, None]
        )
        fq = _law.physical_flux(law, uq)
        if fq.ndim == 2:
            fq = fq[:, :, None]
        dphi1 = 2.0 * math.sqrt(3.0) / h ** 1.5
        vol = np.sum(GL5_WEIGHTS[None, :, None] * fq, axis=1) * (0.5 * h) * dphi1
        s3 = math.sqrt(3.0) / math.sqrt(h)
        rate[:, 1, :] = vol - s3 * (fhat[1:] + fhat[:-1])
    return rate, fhat[0].copy(), fhat[-1].copy()


def dg_rhs(law, mesh: Mesh1D, state: DGState, bc: BoundaryKind) -> np.ndarray:
    """Semi-discrete rate d(coeffs)/dt of the weak form with LF fluxes."""
    return _rhs_with_fluxes(law, mesh, state, bc)[0]


def _check_cfl(law, mesh, state, dt, cfl):
    if not dt > 0.0:
        raise UsageError(f"dt must be positive, got {dt}")
    le, re = _edge_values(state, mesh.h)
    alpha = max(_law.max_wave_speed(law, le), _law.max_wave_speed(law, re))
    if alpha > 0.0 and dt > cfl * mesh.h / alpha * (1.0 + 1e-12):
        raise UsageError(
            f"CFL violation: dt={dt:.3e} exceeds {cfl}*h/alpha={cfl * mesh.h / alpha:.3e}"
        )


@dataclass
class FluxRecord:
    """Time-integrated boundary fluxes, for conservation bookkeeping."""

    left: np.ndarray = field(default_factory=lambda: np.zeros(1))
    right: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def _ensure(self, n_comp):
        if self.left.shape != (n_comp,):
            self.left = np.zeros(n_comp)
            self.right = np.zeros(n_comp)


def step_forward_euler(law, mesh, state, bc, dt, cfl: float = 0.5, record: FluxRecord | None = None) -> DGState:
    """One forward-Euler step; raises UsageError on CFL violation."""
    _check_cfl(law, mesh, state, dt, cfl)
    rate, fl, fr = _rhs_with_fluxes(law, mesh, state, bc)
    if record is not None:
        record._ensure(fl.size)
        record.left += dt * fl
        record.right += dt * fr
    return DGState(state.degree, state.coeffs + dt * rate, state.time + dt)


def step_rk2(law, mesh, state, bc, dt, cfl: float = 0.5, record: FluxRecord | None = None) -> DGState:
    """Heun two-stage step: u* = u + dt*R(u), u1 = u + dt/2*(R(u) + R(u*))."""
    _check_cfl(law, mesh, state, dt, cfl)
    r1, fl1, fr1 = _rhs_with_fluxes(law, mesh, state, bc)
    mid = DGState(state.degree, state.coeffs + dt * r1, state.time + dt)
    r2, fl2, fr2 = _rhs_with_fluxes(law, mesh, mid, bc)
    if record is not None:
        record._ensure(fl1.size)
        record.left += 0.5 * dt * (fl1 + fl2)
        record.right += 0.5 * dt * (fr1 + fr2)
    return DGState(state.degree, state.coeffs + 0.5 * dt * (r1 + r2), state.time + dt)


def total_mass(state: DGState, mesh: Mesh1D) -> np.ndarray:
    """Integral of the solution per component: sum_j sqrt(h) * coeffs[j, 0]."""
    return math.sqrt(mesh.h) * state.coeffs[:, 0, :].sum(axis=0)


def solve(
    law,
    mesh: Mesh1D,
    ic: Callable,
    bc: BoundaryKind,
    T: float,
    cfl: float = 0.3,
    degree: int = 0,
    snapshot_times=None,
    record: FluxRecord | None = None,
    max_steps: int = 20_000_000,
):
    """March from the projected IC to time T with RK2, dt = cfl*h/alpha.

    Steps are truncated to land exactly on T and on every requested
    snapshot time; returns the DGStates at those times (T itself if no
    snapshot list is given).
    """
    if not T > 0.0:
        raise UsageError("final time must be positive")
    if not 0.0 < cfl <= 0.5:
        raise UsageError(f"cfl must lie in (0, 0.5], got {cfl}")
    state = project_ic(ic, mesh, degree)
    if snapshot_times is None:
        wanted = [T]
    else:
        wanted = sorted(float(t) for t in snapshot_times)
        if wanted and (wanted[0] < 0.0 or wanted[-1] > T * (1.0 + 1e-12)):
            raise UsageError("snapshot times must lie inside [0, T]")
    out = []
    for t in wanted:
        if t == 0.0:
            out.append(state.copy())
    events = [t for t in wanted if t > 0.0]
    if T not in events:
        events.append(T)
    events = sorted(set(events))

    steps = 0
    t = 0.0
    for target in events:
        while t < target:
            le, re = _edge_values(state, mesh.h)
            try:
                alpha = max(_law.max_wave_speed(law, le), _law.max_wave_speed(law, re))
            except NonPhysicalStateError as exc:
                raise SolveError(f"non-physical state: {exc}", steps=steps) from exc
            dt = cfl * mesh.h / alpha if alpha > 0.0 else target - t
            dt = min(dt, target - t)
            try:
                state = step_rk2(law, mesh, state, bc, dt, cfl=0.5, record=record)
            except NonPhysicalStateError as exc:
                raise SolveError(f"step rejected: {exc}", steps=steps) from exc
            steps += 1
            if steps > max_steps:
                raise SolveError("step budget exhausted", steps=steps)
            t = t + dt if t + dt < target else target
            state.time = t
        if target in wanted:
            out.append(state.copy())
    return out


def evaluate_many(state: DGState, mesh: Mesh1D, xs) -> np.ndarray:
    """Modal expansion at points xs; interface points use the left cell."""
    xs = np.asarray(xs, dtype=float)
    idx = mesh.locate(xs)
    h = mesh.h
    centers = mesh.a + (idx + 0.5) * h
    vals = state.coeffs[idx, 0, :] / math.sqrt(h)
    if state.degree == 1:
        phi1 = (2.0 * math.sqrt(3.0) / h ** 1.5) * (xs - centers)
        vals = vals + state.coeffs[idx, 1, :] * phi1[..., None]
    return vals


def evaluate(state: DGState, mesh: Mesh1D, x: float) -> np.ndarray:
    return evaluate_many(state, mesh, np.asarray([x], dtype=float))[0]


def write_snapshot_csv(path, mesh: Mesh1D, states) -> None:
    """CSV export: header x,t,comp_0[,comp_1,comp_2]; one row per cell center."""
    centers = mesh.centers()
    n_comp = states[0].coeffs.shape[-1]
    header = "x,t," + ",".join(f"comp_{c}" for c in range(n_comp))
    lines = [header]
    for st in states:
        vals = evaluate_many(st, mesh, centers)
        for x, row in zip(centers, vals):
            cols = [f"{x:.17g}", f"{st.time:.17g}"] + [f"{v:.17g}" for v in row]
            lines.append(",".join(cols))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def mass_matrix(mesh: Mesh1D, degree: int) -> np.ndarray:
    """Numerically assembled single-cell mass matrix (identity by design)."""
    h = mesh.h
    center = mesh.a + 0.5 * h
    xq = center + 0.5 * h * GL5_NODES
    phi = [np.full(5, 1.0 / math.sqrt(h))]
    if degree >= 1:
        phi.append((2.0 * math.sqrt(3.0) / h ** 1.5) * (xq - center))
    m = np.empty((degree + 1, degree + 1))
    for r in range(degree + 1):
        for s in range(degree + 1):
            m[r, s] = np.sum(GL5_WEIGHTS * phi[r] * phi[s]) * 0.5 * h
    return m
