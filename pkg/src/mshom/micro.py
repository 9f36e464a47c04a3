"""Micro solver: damped relaxation toward the shifted fast equilibrium.

For a frozen slow state x and shift h, the fast stationarity condition is
g(x, y) = eps * h.  Forward Euler on the rescaled layer equation with step
delta_t = alpha * eps turns into the eps-free update

    y <- y + alpha * (g(x, y) - eps * h),

iterated M times from a caller-supplied warm start.  Dissipativity of g
makes the update a contraction for alpha * L < 2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import NumericalFailureError
from .steppers import SCHEMES, VectorField, get_scheme
from .system import TwoScaleSystem

GUESS_POLICIES = ("previous-value", "supplied", "zero")


@dataclass(frozen=True)
class MicroConfig:
    """Relaxation parameters.

    alpha is the damping factor (micro step over eps), m_steps the fixed
    iteration count M.  initial_guess_policy resolves what seeds the
    iteration when the caller does or does not supply one:

    - ``previous-value``: use the supplied guess when present, else zero;
    - ``supplied``: require a guess, error on None;
    - ``zero``: always start from the origin.
    """

    alpha: float = 1.0
    m_steps: int = 1
    initial_guess_policy: str = "previous-value"
    scheme: str = "euler"

    def __post_init__(self):
        if not self.alpha > 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.m_steps < 1:
            raise ValueError(f"m_steps must be >= 1, got {self.m_steps}")
        if self.initial_guess_policy not in GUESS_POLICIES:
            raise ValueError(
                f"unknown initial_guess_policy {self.initial_guess_policy!r},"
                f" expected one of {GUESS_POLICIES}"
            )
        if self.scheme not in SCHEMES:
            raise ValueError(
                f"unknown scheme {self.scheme!r}, expected one of {sorted(SCHEMES)}"
            )


def resolve_guess(config: MicroConfig, n_y: int, y0: np.ndarray | None) -> np.ndarray:
    if config.initial_guess_policy == "zero":
        return np.zeros(n_y)
    if y0 is None:
        if config.initial_guess_policy == "supplied":
            raise ValueError("initial_guess_policy 'supplied' requires an explicit y0")
        return np.zeros(n_y)
    return np.asarray(y0, dtype=float).copy()


def relax_solve(
    system: TwoScaleSystem,
    x: np.ndarray,
    h: np.ndarray | None,
    y0: np.ndarray | None,
    epsilon: float,
    config: MicroConfig,
) -> np.ndarray:
    """M relaxation steps toward g(x, y) = eps * h; one micro call.

    h = None means the unshifted equilibrium (h = 0).  The returned iterate
    is y_M; no tolerance-based early exit, the step count is the contract.
    """
    if not epsilon > 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    x = np.asarray(x, dtype=float)
    y = resolve_guess(config, system.n_y, y0)
    if h is None:
        eh = np.zeros(system.n_y)
    else:
        eh = epsilon * np.asarray(h, dtype=float)

    if config.scheme == "euler":
        y = _kernels.relax(system.g, x, eh, y, config.alpha, config.m_steps)
    else:
        # experimental schemes integrate the layer field directly
        step = get_scheme(config.scheme)
        field = VectorField(
            dim=system.n_y,
            eval=lambda v: (np.asarray(system.g(x, v)) - eh) / epsilon,
        )
        dt = config.alpha * epsilon
        for _ in range(config.m_steps):
            y = step(field, y, dt)
    if not np.all(np.isfinite(y)):
        raise NumericalFailureError(
            "micro relaxation produced non-finite iterate", step=config.m_steps
        )
    return y
