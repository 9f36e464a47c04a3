"""One-step integrators used by every stage of the solver.

The micro solver pairs forward Euler with the relaxation field, the
coupled and macro stages default to classical RK4; which scheme a stage
uses is plain data (a name in :data:`SCHEMES`) so the pairing stays
swappable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NumericalFailureError


@dataclass(frozen=True)
class VectorField:
    dim: int
    eval: Callable[[np.ndarray], np.ndarray]


def euler_step(field: VectorField, state: np.ndarray, dt: float) -> np.ndarray:
    out = state + dt * np.asarray(field.eval(state))
    if not np.all(np.isfinite(out)):
        raise NumericalFailureError("euler step produced non-finite state", step=0)
    return out


def rk4_step(field: VectorField, state: np.ndarray, dt: float) -> np.ndarray:
    k1 = np.asarray(field.eval(state))
    k2 = np.asarray(field.eval(state + 0.5 * dt * k1))
    k3 = np.asarray(field.eval(state + 0.5 * dt * k2))
    k4 = np.asarray(field.eval(state + dt * k3))
    out = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise NumericalFailureError("rk4 step produced non-finite state", step=0)
    return out


SCHEMES: dict[str, Callable[[VectorField, np.ndarray, float], np.ndarray]] = {
    "euler": euler_step,
    "rk4": rk4_step,
}


def get_scheme(name: str):
    try:
        return SCHEMES[name]
    except KeyError:
        raise ValueError(f"unknown scheme {name!r}, expected one of {sorted(SCHEMES)}") from None
