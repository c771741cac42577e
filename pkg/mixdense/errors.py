"""Exception hierarchy."""

from __future__ import annotations

from typing import Any


class MixdenseError(Exception):
    """Base class for every error raised by the package."""


class InputError(MixdenseError, ValueError):
    """Bad argument: out-of-range parameter or dimension mismatch."""


class InvariantViolation(MixdenseError):
    """A mixture failed its simplex/scale invariants at use time."""


class ResourceError(MixdenseError):
    """Requested grid or partition exceeds the configured caps."""


class PreconditionError(MixdenseError):
    """A density lacks a class flag or parameter the operation requires."""


class ConstructionError(MixdenseError):
    """Riemann-sum construction produced negative weights or more than unit mass."""


class NonConvergenceError(MixdenseError):
    """A parameter search exhausted its budget."""

    def __init__(self, message: str, partial: Any = None):
        super().__init__(message)
        self.partial = partial


class BudgetExceeded(NonConvergenceError):
    """Wall-clock budget ran out mid-search."""


class ConfigError(MixdenseError):
    """Invalid run or suite configuration (usage error)."""
