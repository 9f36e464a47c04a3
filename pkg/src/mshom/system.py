"""Two-scale system container and structural probes.

A system couples a slow block dx/dt = f(x, y) to a fast block
dy/dt = g(x, y) / eps.  The fast field is assumed strongly dissipative in
y, quantified by ``beta_hat``; nothing here enforces that globally (some
bundled examples are only locally dissipative), but :func:`check_dissipativity`
samples the inner-product bound so a configuration can be sanity-checked
before a long run.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NumericalFailureError

Field = Callable[[np.ndarray, np.ndarray], np.ndarray]
Jacobian = Callable[[np.ndarray, np.ndarray], np.ndarray]

# Central-difference step scale for numeric Jacobians.
_FD_SCALE = float(np.sqrt(np.finfo(float).eps))


@dataclass(frozen=True)
class TwoScaleSystem:
    """Immutable bundle of the slow/fast right-hand sides.

    Parameters
    ----------
    name : str
        Identifier used in reports.
    n_x, n_y : int
        Slow and fast dimensions, both >= 1.
    f, g : callable
        Slow and fast fields mapping (x, y) to vectors of length n_x and n_y.
    beta_hat : float
        Dissipativity rate estimate used by the layer-termination criterion.
    g_jac_y, g_jac_x : callable, optional
        Analytic Jacobians of g with respect to y and x.  When absent,
        :func:`jacobian_g` falls back to central differences.
    """

    name: str
    n_x: int
    n_y: int
    f: Field
    g: Field
    beta_hat: float
    g_jac_y: Jacobian | None = None
    g_jac_x: Jacobian | None = None

    def __post_init__(self):
        if self.n_x < 1 or self.n_y < 1:
            raise ValueError(f"dimensions must be >= 1, got n_x={self.n_x}, n_y={self.n_y}")
        if not self.beta_hat > 0.0:
            raise ValueError(f"beta_hat must be positive, got {self.beta_hat}")

    def check_shapes(self, x: np.ndarray, y: np.ndarray) -> None:
        """Probe f and g once and raise if either returns the wrong length."""
        fx = np.asarray(self.f(x, y))
        gx = np.asarray(self.g(x, y))
        if fx.shape != (self.n_x,):
            raise ValueError(f"f returned shape {fx.shape}, expected ({self.n_x},)")
        if gx.shape != (self.n_y,):
            raise ValueError(f"g returned shape {gx.shape}, expected ({self.n_y},)")


def check_dissipativity(
    system: TwoScaleSystem,
    sample_count: int = 200,
    box_radius: float = 1.0,
    seed: int = 0,
    x_center: np.ndarray | float = 0.0,
    y_center: np.ndarray | float = 0.0,
) -> float:
    """Sampled lower bound on the fast field's one-sided Lipschitz rate.

    Draws pairs (y, y') uniformly from a box of half-width ``box_radius``
    around ``y_center`` (x from the analogous box around ``x_center``) and
    returns the minimum over samples of

        -<g(x, y) - g(x, y'), y - y'> / |y - y'|^2.

    A positive return is consistent with dissipativity on the sampled box;
    it is a probe, not a proof.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    xc = np.broadcast_to(np.asarray(x_center, dtype=float), (system.n_x,))
    yc = np.broadcast_to(np.asarray(y_center, dtype=float), (system.n_y,))
    estimate = np.inf
    for i in range(sample_count):
        x = xc + rng.uniform(-box_radius, box_radius, system.n_x)
        y = yc + rng.uniform(-box_radius, box_radius, system.n_y)
        yp = yc + rng.uniform(-box_radius, box_radius, system.n_y)
        d = y - yp
        nd2 = float(d @ d)
        if nd2 < 1e-24:
            continue
        dg = np.asarray(system.g(x, y)) - np.asarray(system.g(x, yp))
        if not np.all(np.isfinite(dg)):
            raise NumericalFailureError(
                f"g returned non-finite values at sample {i}", step=i
            )
        estimate = min(estimate, -float(dg @ d) / nd2)
    return float(estimate)


def jacobian_g(system: TwoScaleSystem, x: np.ndarray, y: np.ndarray):
    """Jacobians (G_y, G_x) of the fast field at (x, y).

    Uses the analytic callables when the system provides them, otherwise
    central differences with per-component step sqrt(eps_mach) * max(1, |v_j|).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if system.g_jac_y is not None and system.g_jac_x is not None:
        gy = np.asarray(system.g_jac_y(x, y), dtype=float)
        gx = np.asarray(system.g_jac_x(x, y), dtype=float)
        return gy.reshape(system.n_y, system.n_y), gx.reshape(system.n_y, system.n_x)
    gy = _fd_jacobian(lambda v: system.g(x, v), y, system.n_y)
    gx = _fd_jacobian(lambda v: system.g(v, y), x, system.n_y)
    return gy, gx


def _fd_jacobian(fn, v: np.ndarray, n_out: int) -> np.ndarray:
    jac = np.empty((n_out, v.shape[0]))
    for j in range(v.shape[0]):
        h = _FD_SCALE * max(1.0, abs(v[j]))
        vp = v.copy()
        vm = v.copy()
        vp[j] += h
        vm[j] -= h
        jac[:, j] = (np.asarray(fn(vp)) - np.asarray(fn(vm))) / (2.0 * h)
    return jac
