"""Benchmark problem definitions: law, domain, IC, BC targets.

Network-facing quantities are primitive variables for Euler (rho, u, p)
and the plain scalar otherwise; the solver always works on conserved
variables. Final times keep every wave inside the domain for the
transmissive cases.
"""
from __future__ import annotations

import numpy as np

from . import law as _law
from .errors import UsageError
from .neural import IDENTITY, TANH_PLUS_ONE, OutputTransform

ADVECTION_STEP = "advection_step"
ADVECTION_SINE = "advection_sine"
BURGERS_GAUSS = "burgers_gauss"
BURGERS_RIEMANN = "burgers_riemann"
BURGERS_SINE = "burgers_sine"
SOD = "sod"

PROBLEM_IDS = (
    ADVECTION_STEP,
    ADVECTION_SINE,
    BURGERS_GAUSS,
    BURGERS_RIEMANN,
    BURGERS_SINE,
    SOD,
)

SOD_LEFT = np.array([1.0, 0.0, 1.0])     # primitive (rho, u, p), x < 1
SOD_RIGHT = np.array([0.125, 0.0, 0.1])  # primitive, x > 1
ADV_JUMP = 0.75


class Problem:
    """One benchmark case; immutable after construction."""

    def __init__(self, pid: str, gamma: float = 1.4):
        if pid not in PROBLEM_IDS:
            raise UsageError(f"unknown problem id {pid!r}")
        self.pid = pid
        if pid == ADVECTION_STEP:
            self.law = _law.advection(-1.0)
            self.a, self.length, self.T = 0.0, 1.0, 1.0
            self.bc_kind = "dirichlet"
        elif pid == ADVECTION_SINE:
            self.law = _law.advection(-1.0)
            self.a, self.length, self.T = 0.0, 1.0, 0.5
            self.bc_kind = "periodic"
        elif pid == BURGERS_GAUSS:
            self.law = _law.burgers()
            self.a, self.length, self.T = -2.0, 4.0, 1.0
            self.bc_kind = "transmissive"
        elif pid == BURGERS_RIEMANN:
            self.law = _law.burgers()
            self.a, self.length, self.T = 0.0, 1.0, 0.4
            self.bc_kind = "transmissive"
        elif pid == BURGERS_SINE:
            self.law = _law.burgers()
            self.a, self.length, self.T = 0.0, 2.0, 0.5
            self.bc_kind = "periodic"
        else:
            self.law = _law.euler(gamma)
            self.a, self.length, self.T = 0.0, 2.0, 0.4
            self.bc_kind = "transmissive"

    @property
    def b(self) -> float:
        return self.a + self.length

    @property
    def n_net_out(self) -> int:
        return 3 if self.pid == SOD else 1

    @property
    def transform(self) -> OutputTransform:
        if self.pid == SOD:
            return OutputTransform(TANH_PLUS_ONE, (0, 2))  # rho and p stay positive
        return OutputTransform(IDENTITY)

    @property
    def component_names(self):
        return ("rho", "u", "p") if self.pid == SOD else ("u",)

    # -- initial conditions ----------------------------------------------

    def ic_net(self, x) -> np.ndarray:
        """IC in network space, shape (n, n_net_out)."""
        x = np.asarray(x, dtype=float).ravel()
        if self.pid == ADVECTION_STEP:
            return np.where(x < ADV_JUMP, 1.0, 0.0)[:, None]
        if self.pid == ADVECTION_SINE:
            return np.sin(2.0 * np.pi * x)[:, None]
        if self.pid == BURGERS_GAUSS:
            return np.exp(-x * x)[:, None]
        if self.pid == BURGERS_RIEMANN:
            return np.where(x < 0.5, 1.0, 0.0)[:, None]
        if self.pid == BURGERS_SINE:
            return np.sin(np.pi * x)[:, None]
        return np.where(x[:, None] < 1.0, SOD_LEFT[None, :], SOD_RIGHT[None, :])

    def ic_cons(self, x) -> np.ndarray:
        """IC in conserved variables, for the DG solver."""
        vals = self.ic_net(x)
        if self.pid == SOD:
            return _law.primitive_to_conserved(self.law, vals)
        return vals

    # -- boundary data ------------------------------------------------------

    def bdy_net(self, x, t) -> np.ndarray:
        """Boundary targets in network space at boundary coordinate x.

        Transmissive cases use the constant far-field states of the IC
        (valid for the chosen final times); the advection demo uses the
        exact transport values; the periodic sine case pins the exact
        zero value shared by both ends.
        """
        x = np.asarray(x, dtype=float).ravel()
        t = np.asarray(t, dtype=float).ravel()
        if self.pid == ADVECTION_STEP:
            return np.where(x + t < ADV_JUMP, 1.0, 0.0)[:, None]
        if self.pid == ADVECTION_SINE:
            return np.sin(2.0 * np.pi * (x + t))[:, None]
        if self.pid == BURGERS_GAUSS:
            return np.full((x.size, 1), np.exp(-4.0))
        if self.pid == BURGERS_RIEMANN:
            return np.where(x < 0.5, 1.0, 0.0)[:, None]
        if self.pid == BURGERS_SINE:
            return np.zeros((x.size, 1))
        return np.where(x[:, None] < 1.0, SOD_LEFT[None, :], SOD_RIGHT[None, :])

    def bc_dirichlet_cons(self, x, t):
        """Conserved boundary state for the DG solver (dirichlet cases)."""
        vals = self.bdy_net(np.asarray([x]), np.asarray([t]))[0]
        if self.pid == SOD:
            return _law.primitive_to_conserved(self.law, vals)
        return vals

    def __repr__(self):
        return f"Problem({self.pid!r})"


def make_problem(pid: str, gamma: float = 1.4) -> Problem:
    return Problem(pid, gamma=gamma)
