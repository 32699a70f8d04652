"""Exception hierarchy shared by the solver, FD oracle and CLI."""


class BranchPDEError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(BranchPDEError, ValueError):
    """Invalid argument or configuration field."""

    exit_code = 2


class ModelError(BranchPDEError, ValueError):
    """Model data violates its contract (e.g. negative initial density)."""

    exit_code = 3


class SolverBlowupError(BranchPDEError, RuntimeError):
    """Non-finite state, population explosion or stepper failure."""

    exit_code = 4

    def __init__(self, message: str, step: int | None = None, position=None):
        super().__init__(message)
        self.step = step
        self.position = position


class PopulationExplosionError(SolverBlowupError):
    """Particle count exceeded the population cap."""
