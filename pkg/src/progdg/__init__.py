"""Hybrid DG / progressive neural network solver for 1D conservation laws."""

from . import autodiff, config, dg_core, fourier, law, losses, neural, optim, problems, reference
from .errors import (
    ConfigError,
    NonPhysicalStateError,
    NumericalError,
    ProgdgError,
    SolveError,
    TrainingError,
    UsageError,
)

__version__ = "0.1.0"
