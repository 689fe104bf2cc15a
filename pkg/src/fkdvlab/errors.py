"""Exception types shared across the package.

The CLI maps these onto process exit codes, so solver failures,
verification failures and blow-up detection each get their own class.
"""

from __future__ import annotations


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


class GridMismatchError(ValueError):
    """Binary operation on fields living on different grids."""


class UncoveredCaseError(ConfigError):
    """Parameter combination outside the existence taxonomy."""


class NotStationaryError(ValueError):
    """Profile fails the stationarity residual guard."""


class SolverError(RuntimeError):
    """Iteration failed to converge.

    Carries the residual history so callers can report diagnostics.
    """

    def __init__(self, message: str, history: tuple[float, ...] = ()):
        super().__init__(message)
        self.history = tuple(history)


class DivergenceError(SolverError):
    """Iterate norm ran away."""


class ModulationLostError(RuntimeError):
    """Orthogonality equation for the spatial shift has no nearby root."""


class FitError(RuntimeError):
    """A tail or plateau fit was rejected."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class BlowUpError(RuntimeError):
    """Time integration produced non-finite values."""
