"""Exception types shared across the package."""

from __future__ import annotations


class SymorbError(Exception):
    """Base class for all package errors."""


class CollisionError(SymorbError):
    """Trajectory entered the collision guard radius of a primary."""

    def __init__(self, message: str, t: float | None = None, body: str | None = None):
        super().__init__(message)
        self.t = t
        self.body = body


class IntegrationError(SymorbError):
    """Propagation aborted (step limit, step-size underflow)."""


class EventNotFoundError(SymorbError):
    """Requested section crossing did not occur before the time bound."""


class ConvergenceError(SymorbError):
    """Newton correction failed to reach the residual target."""

    def __init__(self, message: str, residual: float | None = None, iters: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.iters = iters


class IllConditionedError(SymorbError):
    """A linear solve or matrix inversion exceeded the conditioning bound."""


class DegenerateIndexError(SymorbError):
    """Index computation requested exactly at a degenerate (critical) orbit."""


class AmbiguousRotationError(SymorbError):
    """Multiplier motion between consecutive family members is too large to
    unwrap; the family needs refinement between the offending members."""

    def __init__(self, message: str, left: int | None = None, right: int | None = None):
        super().__init__(message)
        self.left = left
        self.right = right


class ConfigError(SymorbError):
    """Invalid or unknown scenario configuration."""
