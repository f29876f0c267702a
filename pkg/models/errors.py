# models/errors.py
"""Exception types raised across the toolkit.

Every error subclasses both ``SP2DError`` and the closest builtin, so callers that
only know about ``ValueError`` / ``RuntimeError`` keep working.
"""

from typing import Optional

__all__ = [
    "SP2DError",
    "InvalidGridError",
    "OutOfDomainError",
    "ParameterError",
    "ResolutionError",
    "ConditioningError",
    "ArityError",
    "ConfigError",
    "StepRejectedError",
    "SimulationDivergedError",
    "DependencyError",
]


class SP2DError(Exception):
    """Base class for everything the toolkit raises on purpose."""


class InvalidGridError(SP2DError, ValueError):
    pass


class OutOfDomainError(SP2DError, ValueError):
    pass


class ParameterError(SP2DError, ValueError):
    pass


class ResolutionError(SP2DError, ValueError):
    pass


class ConditioningError(SP2DError, ValueError):
    pass


class ArityError(SP2DError, ValueError):
    pass


class ConfigError(SP2DError, ValueError):
    pass


class StepRejectedError(SP2DError, RuntimeError):
    """Advective CFL violated; carries the measured speed and the admissible step."""

    def __init__(self, max_speed: float, dt: float, dt_limit: float):
        self.max_speed = max_speed
        self.dt = dt
        self.dt_limit = dt_limit
        super().__init__(
            f"step rejected: dt={dt:.3e} exceeds CFL limit {dt_limit:.3e} (max|v|={max_speed:.3e})"
        )


class SimulationDivergedError(SP2DError, RuntimeError):
    """Non-finite values appeared; ``last_good`` is the last state that was finite."""

    def __init__(self, message: str, last_good: Optional[object] = None):
        self.last_good = last_good
        super().__init__(message)


class DependencyError(SP2DError, RuntimeError):
    pass
