"""Two-stage driver: resolved layer integration, then decoupled macro stepping.

Stage one integrates the fully coupled stiff pair at a resolved step until
the fast state has collapsed onto the closure, detected by watching the
defect z_n = |y_n - Gamma_k(x_n)| every n_p steps: the layer is declared
over at the first check where z stops contracting at the dissipative rate,
z_n >= mu * z_{n-n_p} with mu = exp(-beta_hat * n_p * dt_c / (2 eps)).
Stage two advances only the slow block with the closure supplying the fast
state, at a step no longer tied to eps.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import NumericalFailureError
from .manifold import ManifoldApproximator, ManifoldConfig
from .steppers import VectorField, get_scheme
from .system import TwoScaleSystem

_REL_TIME_TOL = 1e-12


@dataclass(frozen=True)
class DriverConfig:
    """Everything one simulation needs besides the system and initial data."""

    epsilon: float
    t_final: float
    dt_coupled: float
    dt_macro: float
    n_p: int = 10
    criterion_order: int = 2
    manifold: ManifoldConfig = field(default_factory=ManifoldConfig)
    warm_start: bool = True
    coupled_scheme: str = "rk4"
    macro_scheme: str = "rk4"

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not 0.0 < self.dt_coupled <= self.dt_macro <= self.t_final:
            raise ValueError(
                "need 0 < dt_coupled <= dt_macro <= t_final, got "
                f"dt_coupled={self.dt_coupled}, dt_macro={self.dt_macro}, t_final={self.t_final}"
            )
        if self.n_p < 1:
            raise ValueError(f"n_p must be >= 1, got {self.n_p}")
        if self.criterion_order < 0:
            raise ValueError(f"criterion_order must be >= 0, got {self.criterion_order}")
        get_scheme(self.coupled_scheme)
        get_scheme(self.macro_scheme)


@dataclass(frozen=True)
class Trajectory:
    """Sampled states; y is None for the slow-only macro stage."""

    times: np.ndarray
    x: np.ndarray
    y: np.ndarray | None = None

    def __post_init__(self):
        if self.times.ndim != 1 or self.x.ndim != 2 or self.times.shape[0] != self.x.shape[0]:
            raise ValueError("times must be 1-d and match x rows")
        if self.y is not None and self.y.shape[0] != self.times.shape[0]:
            raise ValueError("y rows must match times")
        if self.times.shape[0] > 1 and not np.all(np.diff(self.times) > 0.0):
            raise ValueError("times must be strictly increasing")


@dataclass(frozen=True)
class CoupledStageResult:
    x: np.ndarray
    y: np.ndarray
    trajectory: Trajectory
    t_c: float
    n_c: int
    criterion_fired: bool
    micro_calls: int


@dataclass(frozen=True)
class DecoupledStageResult:
    trajectory: Trajectory
    micro_calls: int


@dataclass(frozen=True)
class SimulationResult:
    coupled: Trajectory
    decoupled: Trajectory
    t_c: float
    n_c: int
    x_final: np.ndarray
    criterion_fired: bool
    micro_calls_total: int
    wall_time: float


def _criterion_config(config: DriverConfig) -> ManifoldConfig:
    return replace(config.manifold, k=config.criterion_order)


def _coupled_steps(system, eps, dt, n, out_x, out_y, scheme):
    if scheme == "rk4":
        _kernels.rk4_coupled_record(system.f, system.g, eps, dt, n, out_x, out_y)
        return
    # non-default schemes run on the stacked state through the generic steppers
    step = get_scheme(scheme)
    n_x = system.n_x

    def stacked(z):
        fx = np.asarray(system.f(z[:n_x], z[n_x:]))
        gy = np.asarray(system.g(z[:n_x], z[n_x:])) / eps
        return np.concatenate((fx, gy))

    fld = VectorField(dim=n_x + system.n_y, eval=stacked)
    z = np.concatenate((out_x[0], out_y[0]))
    for i in range(n):
        z = step(fld, z, dt)
        out_x[i + 1] = z[:n_x]
        out_y[i + 1] = z[n_x:]


def _locate_nonfinite(out_x, out_y, lo, hi):
    for row in range(lo, hi + 1):
        if not (np.all(np.isfinite(out_x[row])) and np.all(np.isfinite(out_y[row]))):
            return row
    return hi


def run_coupled_stage(
    system: TwoScaleSystem,
    x0: np.ndarray,
    y0: np.ndarray,
    config: DriverConfig,
) -> CoupledStageResult:
    """Integrate the coupled pair until the termination criterion fires.

    z is evaluated at n = n_p, 2 n_p, ...; the first comparison happens at
    n = 2 n_p (the n_p check only seeds the baseline).  The comparison is
    z_n >= mu * z_{n-n_p}, so data starting on the closure (z = 0) fires at
    the first eligible check.  If the criterion never fires the stage caps
    at floor(t_final / dt_coupled) steps with criterion_fired False.
    """
    eps = config.epsilon
    dt = config.dt_coupled
    n_max = int(math.floor(config.t_final / dt + 1e-9))
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    out_x = np.empty((n_max + 1, system.n_x))
    out_y = np.empty((n_max + 1, system.n_y))
    out_x[0] = x0
    out_y[0] = y0
    mu = math.exp(-system.beta_hat * config.n_p * dt / (2.0 * eps))
    approx = ManifoldApproximator(system, eps, _criterion_config(config))

    done = 0
    z_prev = None
    gamma_prev = None
    fired = False
    while done < n_max:
        chunk = min(config.n_p, n_max - done)
        _coupled_steps(
            system, eps, dt, chunk,
            out_x[done : done + chunk + 1],
            out_y[done : done + chunk + 1],
            config.coupled_scheme,
        )
        done += chunk
        if not (np.all(np.isfinite(out_x[done])) and np.all(np.isfinite(out_y[done]))):
            bad = _locate_nonfinite(out_x, out_y, done - chunk + 1, done)
            raise NumericalFailureError(
                f"coupled stage produced non-finite state at step {bad}", step=bad
            )
        if done % config.n_p == 0:
            ev = approx.evaluate(out_x[done], gamma_prev)
            z = float(np.linalg.norm(out_y[done] - ev.value))
            gamma_prev = ev.value
            if z_prev is not None and z >= mu * z_prev:
                fired = True
                break
            z_prev = z

    n_c = done
    t_c = n_c * dt
    traj = Trajectory(
        times=np.arange(n_c + 1) * dt,
        x=out_x[: n_c + 1].copy(),
        y=out_y[: n_c + 1].copy(),
    )
    return CoupledStageResult(
        x=out_x[n_c].copy(),
        y=out_y[n_c].copy(),
        trajectory=traj,
        t_c=t_c,
        n_c=n_c,
        criterion_fired=fired,
        micro_calls=approx.total_micro_calls,
    )


def run_decoupled_stage(
    system: TwoScaleSystem,
    x_start: np.ndarray,
    t_start: float,
    config: DriverConfig,
    y_seed: np.ndarray | None = None,
) -> DecoupledStageResult:
    """Advance the slow block on [t_start, t_final] with the closure.

    Each right-hand-side evaluation queries the closure; with warm_start
    enabled the micro solve is seeded by the previous evaluation's value
    plus slope * dt_macro when a slope is available.  The final step is
    shortened to land on t_final exactly.
    """
    horizon = config.t_final - t_start
    if horizon <= _REL_TIME_TOL * max(1.0, abs(config.t_final)):
        raise ValueError("t_start must lie strictly before t_final")
    approx = ManifoldApproximator(system, config.epsilon, config.manifold)
    state = {"value": y_seed, "slope": None}

    def guess():
        if not config.warm_start:
            return None
        v = state["value"]
        if v is None:
            return None
        if state["slope"] is None:
            return v
        return v + state["slope"] * config.dt_macro

    def field_eval(x):
        ev = approx.evaluate(x, guess())
        state["value"] = ev.value
        state["slope"] = ev.slope
        return np.asarray(system.f(x, ev.value), dtype=float)

    fld = VectorField(dim=system.n_x, eval=field_eval)
    step = get_scheme(config.macro_scheme)

    dt = config.dt_macro
    n_full = int(math.floor(horizon / dt + 1e-9))
    remainder = horizon - n_full * dt
    has_tail = remainder > _REL_TIME_TOL * max(1.0, abs(config.t_final))
    n_rows = n_full + (1 if has_tail else 0) + 1

    times = np.empty(n_rows)
    xs = np.empty((n_rows, system.n_x))
    times[0] = t_start
    xs[0] = np.asarray(x_start, dtype=float)
    x = xs[0].copy()
    for i in range(n_full):
        t = t_start + i * dt
        try:
            x = step(fld, x, dt)
        except NumericalFailureError as exc:
            raise NumericalFailureError(
                f"macro stage failed during step starting at t={t:.6g}", time=t
            ) from exc
        times[i + 1] = t_start + (i + 1) * dt
        xs[i + 1] = x
    if has_tail:
        t = t_start + n_full * dt
        try:
            x = step(fld, x, remainder)
        except NumericalFailureError as exc:
            raise NumericalFailureError(
                f"macro stage failed during step starting at t={t:.6g}", time=t
            ) from exc
        xs[n_rows - 1] = x
    times[n_rows - 1] = config.t_final

    return DecoupledStageResult(
        trajectory=Trajectory(times=times, x=xs),
        micro_calls=approx.total_micro_calls,
    )


def _single_point(t: float, x: np.ndarray) -> Trajectory:
    return Trajectory(times=np.array([t]), x=np.asarray(x, dtype=float)[None, :])


def simulate(
    system: TwoScaleSystem,
    x0: np.ndarray,
    y0: np.ndarray,
    config: DriverConfig,
) -> SimulationResult:
    """Run both stages; the slow state at t_final is ``x_final``."""
    t0 = time.perf_counter()
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    system.check_shapes(x0, y0)
    stage1 = run_coupled_stage(system, x0, y0, config)
    remaining = config.t_final - stage1.t_c
    if remaining > _REL_TIME_TOL * max(1.0, abs(config.t_final)):
        stage2 = run_decoupled_stage(system, stage1.x, stage1.t_c, config, y_seed=stage1.y)
        decoupled = stage2.trajectory
        macro_calls = stage2.micro_calls
        x_final = decoupled.x[-1].copy()
    else:
        decoupled = _single_point(stage1.t_c, stage1.x)
        macro_calls = 0
        x_final = stage1.x.copy()
    return SimulationResult(
        coupled=stage1.trajectory,
        decoupled=decoupled,
        t_c=stage1.t_c,
        n_c=stage1.n_c,
        x_final=x_final,
        criterion_fired=stage1.criterion_fired,
        micro_calls_total=stage1.micro_calls + macro_calls,
        wall_time=time.perf_counter() - t0,
    )


def simulate_coupled_only(
    system: TwoScaleSystem,
    x0: np.ndarray,
    y0: np.ndarray,
    config: DriverConfig,
) -> SimulationResult:
    """Fully coupled baseline over [0, t_final] at dt_coupled; no criterion."""
    t0 = time.perf_counter()
    eps = config.epsilon
    dt = config.dt_coupled
    x0 = np.asarray(x0, dtype=float)
    y0 = np.asarray(y0, dtype=float)
    system.check_shapes(x0, y0)
    n_full = int(math.floor(config.t_final / dt + 1e-9))
    remainder = config.t_final - n_full * dt
    has_tail = remainder > _REL_TIME_TOL * max(1.0, abs(config.t_final))
    n_rows = n_full + (1 if has_tail else 0) + 1
    out_x = np.empty((n_rows, system.n_x))
    out_y = np.empty((n_rows, system.n_y))
    out_x[0] = x0
    out_y[0] = y0
    _coupled_steps(system, eps, dt, n_full, out_x[: n_full + 1], out_y[: n_full + 1],
                   config.coupled_scheme)
    times = np.arange(n_full + 1) * dt
    if has_tail:
        _coupled_steps(system, eps, remainder, 1, out_x[n_full:], out_y[n_full:],
                       config.coupled_scheme)
        times = np.append(times, config.t_final)
    if not np.all(np.isfinite(out_x[-1])) or not np.all(np.isfinite(out_y[-1])):
        bad = _locate_nonfinite(out_x, out_y, 1, n_rows - 1)
        raise NumericalFailureError(
            f"coupled baseline produced non-finite state at step {bad}", step=bad
        )
    traj = Trajectory(times=times, x=out_x, y=out_y)
    return SimulationResult(
        coupled=traj,
        decoupled=_single_point(config.t_final, out_x[-1]),
        t_c=config.t_final,
        n_c=n_rows - 1,
        x_final=out_x[-1].copy(),
        criterion_fired=False,
        micro_calls_total=0,
        wall_time=time.perf_counter() - t0,
    )


def z_diagnostic(
    system: TwoScaleSystem,
    trajectory: Trajectory,
    manifold_config: ManifoldConfig,
    epsilon: float,
) -> np.ndarray:
    """Per-sample closure defect |y_t - Gamma_k(x_t)| along a trajectory."""
    if trajectory.y is None:
        raise ValueError("trajectory carries no fast states")
    approx = ManifoldApproximator(system, epsilon, manifold_config)
    out = np.empty(trajectory.times.shape[0])
    guess = None
    for i in range(out.shape[0]):
        ev = approx.evaluate(trajectory.x[i], guess)
        guess = ev.value
        out[i] = float(np.linalg.norm(trajectory.y[i] - ev.value))
    return out
