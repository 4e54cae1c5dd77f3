"""Exception hierarchy shared across the package."""


class ProgdgError(Exception):
    """Base class for all library errors."""


class UsageError(ProgdgError, ValueError):
    """Caller violated a precondition or passed invalid arguments."""


class ConfigError(UsageError):
    """Invalid experiment configuration (maps to CLI exit code 2)."""


class NonPhysicalStateError(ProgdgError):
    """An Euler state with non-positive density or pressure was encountered."""

    def __init__(self, state, message="non-physical Euler state"):
        super().__init__(f"{message}: {state}")
        self.state = state


class NumericalError(ProgdgError):
    """NaN or Inf appeared where a finite number was required."""


class TrainingError(ProgdgError):
    """Training-time failure (skip rate, NaN loss), tagged with a task index."""

    def __init__(self, message, task=None):
        super().__init__(message if task is None else f"task {task}: {message}")
        self.task = task


class SolveError(ProgdgError):
    """Time-marching failure; carries the step count reached."""

    def __init__(self, message, steps=None):
        super().__init__(message if steps is None else f"{message} (after {steps} steps)")
        self.steps = steps
