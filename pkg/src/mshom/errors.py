"""Exception types shared across the solver stack."""

from __future__ import annotations


class MshomError(Exception):
    """Base class for all package-specific failures."""


class NumericalFailureError(MshomError):
    """A computed quantity became non-finite.

    Carries enough context to locate the failure: ``step`` for stepper and
    micro-solver loops, ``time`` for macro integration.
    """

    def __init__(self, message: str, *, step: int | None = None, time: float | None = None):
        super().__init__(message)
        self.step = step
        self.time = time


class SingularityError(MshomError):
    """A linear solve hit a singular or hopelessly ill-conditioned matrix."""


class DivergenceError(MshomError):
    """An iteration failed to contract within its iteration budget."""
