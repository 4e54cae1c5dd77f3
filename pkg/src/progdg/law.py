"""Conservation laws: physical fluxes, wave speeds, and the Lax-Friedrichs flux.

Scalar laws (advection, Burgers) act elementwise on arrays of any shape.
Euler states are arrays whose last axis holds the conserved variables
(rho, rho*u, E); primitive variables are (rho, u, p).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonPhysicalStateError, UsageError

ADVECTION = "advection"
BURGERS = "burgers"
EULER = "euler"


@dataclass(frozen=True)
class ConservationLaw:
    kind: str
    speed: float = -1.0  # advection only
    gamma: float = 1.4   # euler only

    def __post_init__(self):
        if self.kind not in (ADVECTION, BURGERS, EULER):
            raise UsageError(f"unknown law kind: {self.kind!r}")
        if self.kind == EULER and not self.gamma > 1.0:
            raise UsageError(f"Euler gamma must exceed 1, got {self.gamma}")

    @property
    def n_comp(self) -> int:
        return 3 if self.kind == EULER else 1


def advection(speed: float = -1.0) -> ConservationLaw:
    return ConservationLaw(ADVECTION, speed=speed)


def burgers() -> ConservationLaw:
    return ConservationLaw(BURGERS)


def euler(gamma: float = 1.4) -> ConservationLaw:
    return ConservationLaw(EULER, gamma=gamma)


def pressure(law: ConservationLaw, u):
    """Pressure of conserved Euler states, p = (gamma-1)(E - rho*v^2/2)."""
    u = np.asarray(u, dtype=float)
    rho, mom, ene = u[..., 0], u[..., 1], u[..., 2]
    return (law.gamma - 1.0) * (ene - 0.5 * mom * mom / rho)


def is_physical(law: ConservationLaw, u) -> np.ndarray:
    """Boolean mask: rho > 0 and p > 0. Scalar laws are always physical."""
    if law.kind != EULER:
        return np.ones(np.shape(np.asarray(u)), dtype=bool)
    u = np.asarray(u, dtype=float)
    rho = u[..., 0]
    ok = rho > 0.0
    p = np.where(ok, (law.gamma - 1.0) * (u[..., 2] - 0.5 * u[..., 1] ** 2 / np.where(ok, rho, 1.0)), -1.0)
    return ok & (p > 0.0)


def _check_physical(law, u):
    ok = is_physical(law, u)
    if not np.all(ok):
        bad = np.asarray(u, dtype=float)[~ok]
        raise NonPhysicalStateError(bad.reshape(-1, law.n_comp)[0])


def conserved_to_primitive(law: ConservationLaw, u):
    u = np.asarray(u, dtype=float)
    if law.kind != EULER:
        return u
    rho = u[..., 0]
    v = u[..., 1] / rho
    p = pressure(law, u)
    return np.stack([rho, v, p], axis=-1)


def primitive_to_conserved(law: ConservationLaw, prim):
    prim = np.asarray(prim, dtype=float)
    if law.kind != EULER:
        return prim
    rho, v, p = prim[..., 0], prim[..., 1], prim[..., 2]
    ene = p / (law.gamma - 1.0) + 0.5 * rho * v * v
    return np.stack([rho, rho * v, ene], axis=-1)


def sound_speed(law: ConservationLaw, u):
    u = np.asarray(u, dtype=float)
    return np.sqrt(law.gamma * pressure(law, u) / u[..., 0])


def physical_flux(law: ConservationLaw, u, check: bool = True):
    """Flux f(u): advection c*u, Burgers u^2/2, Euler (rho*v, rho*v^2+p, v(E+p))."""
    u = np.asarray(u, dtype=float)
    if law.kind == ADVECTION:
        return law.speed * u
    if law.kind == BURGERS:
        return 0.5 * u * u
    if check:
        _check_physical(law, u)
    rho, mom, ene = u[..., 0], u[..., 1], u[..., 2]
    v = mom / rho
    p = (law.gamma - 1.0) * (ene - 0.5 * mom * v)
    return np.stack([mom, mom * v + p, v * (ene + p)], axis=-1)


def wave_speed(law: ConservationLaw, u, check: bool = True):
    """Per-state max characteristic speed |f'(u)| (Euler: |v| + c)."""
    u = np.asarray(u, dtype=float)
    if law.kind == ADVECTION:
        return np.full(u.shape, abs(law.speed))
    if law.kind == BURGERS:
        return np.abs(u)
    if check:
        _check_physical(law, u)
    return np.abs(u[..., 1] / u[..., 0]) + sound_speed(law, u)


def max_wave_speed(law: ConservationLaw, states) -> float:
    """Largest characteristic speed over a non-empty collection of states."""
    arr = np.asarray(states, dtype=float)
    if arr.size == 0:
        raise UsageError("max_wave_speed needs at least one state")
    if law.kind == EULER and arr.shape[-1] != 3:
        raise UsageError("Euler states must have 3 components on the last axis")
    return float(np.max(wave_speed(law, arr)))


def lf_flux(law: ConservationLaw, left, right, alpha):
    """Lax-Friedrichs flux (f(l) + f(r) - alpha*(r - l)) / 2, componentwise."""
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    fl = physical_flux(law, left)
    fr = physical_flux(law, right)
    return 0.5 * (fl + fr - alpha * (right - left))
