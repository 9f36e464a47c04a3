"""Bundled example systems, reference solutions, and convergence sweeps.

Five stock problems exercise the solver across regimes: a linear pair with
a closed-form solution, an enzyme kinetics model, a periodically forced
Van der Pol oscillator, a cubic Chua circuit, and the classic Van der Pol
equation in Lienard form.  Each case carries the step sizes, micro
parameters, and algorithm variant it is normally run with; sweeps vary one
axis (epsilon, dt_macro, or tau) per order k and fit log-log slopes.
"""

from __future__ import annotations

import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import _accel, _kernels
from .driver import DriverConfig, SimulationResult, simulate, simulate_coupled_only
from .errors import MshomError
from .manifold import ManifoldConfig
from .micro import MicroConfig
from .system import TwoScaleSystem

SWEEP_AXES = {"eps": "epsilon", "epsilon": "epsilon", "dt": "dt_macro",
              "dt_macro": "dt_macro", "tau": "tau"}


@dataclass(frozen=True)
class BenchmarkCase:
    """A stock problem plus the configuration it is normally run with."""

    name: str
    system: TwoScaleSystem
    x0: np.ndarray
    y0: np.ndarray
    t_final: float
    epsilon: float
    dt_coupled: float
    dt_macro: float
    algorithm: str
    diff_scheme: str
    tau: float
    alpha: float
    m_steps: int
    ref_dt: float
    exact: Callable[[float, float], np.ndarray] | None = None

    def default_config(self, **overrides) -> DriverConfig:
        return build_config(self, **overrides)


# -- right-hand sides ---------------------------------------------------------

_SYSTEM_CACHE: dict[tuple[str, bool], TwoScaleSystem] = {}


def _cached_system(name: str, builder) -> TwoScaleSystem:
    key = (name, _accel.enabled())
    sys = _SYSTEM_CACHE.get(key)
    if sys is None:
        sys = builder()
        _SYSTEM_CACHE[key] = sys
    return sys


def _build_naive() -> TwoScaleSystem:
    def f(x, y):
        out = np.empty(1)
        out[0] = y[0]
        return out

    def g(x, y):
        out = np.empty(1)
        out[0] = x[0] - y[0]
        return out

    return TwoScaleSystem(
        name="naive", n_x=1, n_y=1,
        f=_accel.maybe_jit(f), g=_accel.maybe_jit(g), beta_hat=1.0,
        g_jac_y=lambda x, y: np.array([[-1.0]]),
        g_jac_x=lambda x, y: np.array([[1.0]]),
    )


def _build_enzyme(c: float = 0.5) -> TwoScaleSystem:
    def f(x, y):
        out = np.empty(1)
        out[0] = -x[0] + (x[0] + c) * y[0]
        return out

    def g(x, y):
        out = np.empty(1)
        out[0] = x[0] - (x[0] + 1.0) * y[0]
        return out

    return TwoScaleSystem(
        name="enzyme", n_x=1, n_y=1,
        f=_accel.maybe_jit(f), g=_accel.maybe_jit(g), beta_hat=1.5,
        g_jac_y=lambda x, y: np.array([[-(x[0] + 1.0)]]),
        g_jac_x=lambda x, y: np.array([[1.0 - y[0]]]),
    )


def _build_forced_vdp(a: float = 2.0, b: float = 1.0) -> TwoScaleSystem:
    two_pi = 2.0 * math.pi

    def f(x, y):
        out = np.empty(2)
        out[0] = -y[0] + a * np.sin(two_pi * x[1])
        out[1] = b
        return out

    def g(x, y):
        out = np.empty(1)
        out[0] = y[0] + x[0] - y[0] ** 3 / 3.0
        return out

    return TwoScaleSystem(
        name="forced_vdp", n_x=2, n_y=1,
        f=_accel.maybe_jit(f), g=_accel.maybe_jit(g), beta_hat=0.01,
        g_jac_y=lambda x, y: np.array([[1.0 - y[0] ** 2]]),
        g_jac_x=lambda x, y: np.array([[1.0, 0.0]]),
    )


def _build_chua(a=0.7, b=0.25, c1=7.0, c2=15.0, c3=20.0, d=1.0) -> TwoScaleSystem:
    def f(x, y):
        out = np.empty(2)
        out[0] = -d * x[1]
        out[1] = -a * y[0] + x[0] + b * x[1]
        return out

    def g(x, y):
        out = np.empty(1)
        out[0] = x[1] - c3 * y[0] ** 3 - c2 * y[0] ** 2 - c1 * y[0]
        return out

    return TwoScaleSystem(
        name="chua", n_x=2, n_y=1,
        f=_accel.maybe_jit(f), g=_accel.maybe_jit(g), beta_hat=10.0,
        g_jac_y=lambda x, y: np.array([[-(3.0 * c3 * y[0] ** 2 + 2.0 * c2 * y[0] + c1)]]),
        g_jac_x=lambda x, y: np.array([[0.0, 1.0]]),
    )


def _build_vdp() -> TwoScaleSystem:
    def f(x, y):
        out = np.empty(1)
        out[0] = y[0]
        return out

    def g(x, y):
        out = np.empty(1)
        out[0] = -((x[0] ** 2 - 1.0) * y[0] + x[0])
        return out

    return TwoScaleSystem(
        name="vdp", n_x=1, n_y=1,
        f=_accel.maybe_jit(f), g=_accel.maybe_jit(g), beta_hat=3.0,
        g_jac_y=lambda x, y: np.array([[-(x[0] ** 2 - 1.0)]]),
        g_jac_x=lambda x, y: np.array([[-(2.0 * x[0] * y[0] + 1.0)]]),
    )


def naive_exact(t: float, x0: float = 1.0, y0: float = 2.0, epsilon: float = 1e-5) -> float:
    """Closed-form slow solution of the linear stock problem.

    The eigenvalues are evaluated exactly as written; at small eps the
    lambda_2 numerator cancels catastrophically, which floors the accuracy
    of this formula near 1e-9 at eps = 1e-5 in double precision.  Kept
    verbatim because the published baseline errors include that floor.
    """
    s = math.sqrt(1.0 + 4.0 * epsilon)
    lam1 = -(1.0 + s) / (2.0 * epsilon)
    lam2 = -(1.0 - s) / (2.0 * epsilon)
    c1 = (-lam2 * x0 + y0) / (lam1 - lam2)
    c2 = (lam1 * x0 - y0) / (lam1 - lam2)
    return c1 * math.exp(lam1 * t) + c2 * math.exp(lam2 * t)


def _naive_exact_vec(t: float, epsilon: float) -> np.ndarray:
    return np.array([naive_exact(t, 1.0, 2.0, epsilon)])


def registry() -> dict[str, BenchmarkCase]:
    """All stock problems keyed by name; systems are cached per backend."""
    cases = [
        BenchmarkCase(
            name="naive", system=_cached_system("naive", _build_naive),
            x0=np.array([1.0]), y0=np.array([2.0]), t_final=4.0,
            epsilon=1e-5, dt_coupled=1e-5, dt_macro=5e-3,
            algorithm="type1", diff_scheme="forward", tau=1e-5,
            alpha=1.0, m_steps=1, ref_dt=1e-5, exact=_naive_exact_vec,
        ),
        BenchmarkCase(
            name="enzyme", system=_cached_system("enzyme", _build_enzyme),
            x0=np.array([1.0]), y0=np.array([0.0]), t_final=1.0,
            epsilon=1e-2, dt_coupled=1e-5, dt_macro=1e-2,
            algorithm="type1", diff_scheme="central", tau=1e-6,
            alpha=0.5, m_steps=10, ref_dt=1e-6,
        ),
        BenchmarkCase(
            name="forced_vdp", system=_cached_system("forced_vdp", _build_forced_vdp),
            x0=np.array([3.0, 1.0]), y0=np.array([1.0]), t_final=1.0,
            epsilon=1e-4, dt_coupled=1e-5, dt_macro=1e-2,
            algorithm="type2", diff_scheme="forward", tau=1e-6,
            alpha=0.1, m_steps=25, ref_dt=1e-5,
        ),
        BenchmarkCase(
            name="chua", system=_cached_system("chua", _build_chua),
            x0=np.array([1.0, 1.0]), y0=np.array([1.0]), t_final=1.0,
            epsilon=1e-2, dt_coupled=1e-6, dt_macro=1e-2,
            algorithm="type2", diff_scheme="central", tau=1e-6,
            alpha=0.1, m_steps=10, ref_dt=1e-6,
        ),
        BenchmarkCase(
            name="vdp", system=_cached_system("vdp", _build_vdp),
            x0=np.array([4.0]), y0=np.array([2.0]), t_final=5.0,
            epsilon=1e-3, dt_coupled=1e-5, dt_macro=2e-2,
            algorithm="type2", diff_scheme="forward", tau=1e-6,
            alpha=0.1, m_steps=20, ref_dt=1e-5,
        ),
    ]
    return {case.name: case for case in cases}


# -- configuration plumbing ---------------------------------------------------

_DRIVER_KEYS = frozenset(
    {"epsilon", "t_final", "dt_coupled", "dt_macro", "n_p", "criterion_order",
     "warm_start", "coupled_scheme", "macro_scheme"}
)
_MANIFOLD_KEYS = frozenset({"k", "algorithm", "diff_scheme", "tau", "memoize"})
_MICRO_KEYS = frozenset({"alpha", "m_steps", "initial_guess_policy", "micro_scheme"})

KNOWN_OVERRIDES = _DRIVER_KEYS | _MANIFOLD_KEYS | _MICRO_KEYS


def build_config(case: BenchmarkCase, **overrides) -> DriverConfig:
    """Case defaults merged with overrides into a full DriverConfig."""
    unknown = set(overrides) - KNOWN_OVERRIDES
    if unknown:
        raise ValueError(f"unknown override keys: {sorted(unknown)}")
    micro_kw = {
        "alpha": overrides.get("alpha", case.alpha),
        "m_steps": overrides.get("m_steps", case.m_steps),
    }
    if "initial_guess_policy" in overrides:
        micro_kw["initial_guess_policy"] = overrides["initial_guess_policy"]
    if "micro_scheme" in overrides:
        micro_kw["scheme"] = overrides["micro_scheme"]
    manifold_kw = {
        "k": overrides.get("k", 0),
        "algorithm": overrides.get("algorithm", case.algorithm),
        "diff_scheme": overrides.get("diff_scheme", case.diff_scheme),
        "tau": overrides.get("tau", case.tau),
        "micro": MicroConfig(**micro_kw),
    }
    if "memoize" in overrides:
        manifold_kw["memoize"] = overrides["memoize"]
    driver_kw = {
        "epsilon": overrides.get("epsilon", case.epsilon),
        "t_final": overrides.get("t_final", case.t_final),
        "dt_coupled": overrides.get("dt_coupled", case.dt_coupled),
        "dt_macro": overrides.get("dt_macro", case.dt_macro),
        "manifold": ManifoldConfig(**manifold_kw),
    }
    for key in ("n_p", "criterion_order", "warm_start", "coupled_scheme", "macro_scheme"):
        if key in overrides:
            driver_kw[key] = overrides[key]
    return DriverConfig(**driver_kw)


# -- references ---------------------------------------------------------------

_REF_CACHE: dict[tuple, np.ndarray] = {}
_REF_LOCK = threading.Lock()


def reference_solution(case: BenchmarkCase, epsilon: float, dt_fine: float | None = None) -> np.ndarray:
    """Slow state at t_final from the fully coupled solver at dt_fine.

    Uses compensated summation so multi-million-step references do not
    accumulate drift.  Results are cached per (case, epsilon, dt_fine,
    backend); a cache hit returns the stored array (bitwise identical to
    recomputation, which is deterministic).
    """
    if dt_fine is None:
        dt_fine = case.ref_dt
    key = (case.name, float(epsilon), float(dt_fine), _accel.enabled())
    with _REF_LOCK:
        hit = _REF_CACHE.get(key)
    if hit is not None:
        return hit.copy()
    n = int(math.floor(case.t_final / dt_fine + 1e-9))
    x, y = _kernels.rk4_coupled_final(
        case.system.f, case.system.g, case.x0, case.y0, epsilon, dt_fine, n, kahan=True
    )
    rem = case.t_final - n * dt_fine
    if rem > 1e-12 * case.t_final:
        x, y = _kernels.rk4_coupled_final(
            case.system.f, case.system.g, x, y, epsilon, rem, 1, kahan=True
        )
    with _REF_LOCK:
        _REF_CACHE[key] = x.copy()
    return x


def case_reference(case: BenchmarkCase, epsilon: float) -> np.ndarray:
    """Exact solution when the case has one, else the coupled reference."""
    if case.exact is not None:
        return np.asarray(case.exact(case.t_final, epsilon), dtype=float)
    return reference_solution(case, epsilon)


# -- sweeps -------------------------------------------------------------------

@dataclass(frozen=True)
class CellResult:
    problem: str
    k: int | str
    alg: str
    diff: str
    eps: float
    dt: float
    tau: float
    m_steps: int
    alpha: float
    t_c: float
    error: float
    micro_calls: int
    wall_ms: float
    status: str


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r2: float
    n_points: int


@dataclass(frozen=True)
class ConvergenceReport:
    problem: str
    axis: str
    rows: list[CellResult]
    fits: dict[int | str, FitResult]


def fit_loglog(xs, ys) -> FitResult:
    """Least-squares slope of log10(y) against log10(x)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape[0] < 2:
        raise ValueError("need at least two points to fit")
    if np.any(xs <= 0.0) or np.any(ys <= 0.0):
        raise ValueError("log-log fit needs positive data")
    lx = np.log10(xs)
    ly = np.log10(ys)
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - np.mean(ly)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return FitResult(slope=float(slope), intercept=float(intercept), r2=r2,
                     n_points=xs.shape[0])


def _cell_from_result(case, config, k, result: SimulationResult, ref) -> CellResult:
    err = float(np.linalg.norm(result.x_final - ref, 2))
    return CellResult(
        problem=case.name, k=k,
        alg=config.manifold.algorithm, diff=config.manifold.diff_scheme,
        eps=config.epsilon, dt=config.dt_macro, tau=config.manifold.tau,
        m_steps=config.manifold.micro.m_steps, alpha=config.manifold.micro.alpha,
        t_c=result.t_c, error=err, micro_calls=result.micro_calls_total,
        wall_ms=result.wall_time * 1e3, status="ok",
    )


def _failed_cell(case, config, k, exc) -> CellResult:
    return CellResult(
        problem=case.name, k=k,
        alg=config.manifold.algorithm, diff=config.manifold.diff_scheme,
        eps=config.epsilon, dt=config.dt_macro, tau=config.manifold.tau,
        m_steps=config.manifold.micro.m_steps, alpha=config.manifold.micro.alpha,
        t_c=float("nan"), error=float("nan"), micro_calls=0,
        wall_ms=float("nan"), status=type(exc).__name__,
    )


def run_cell(case: BenchmarkCase, k: int | str, **overrides) -> CellResult:
    """One simulation of the case at order k; k='coupled' for the baseline."""
    if k == "coupled":
        config = build_config(case, **overrides)
        result = simulate_coupled_only(case.system, case.x0, case.y0, config)
    else:
        config = build_config(case, k=int(k), **overrides)
        result = simulate(case.system, case.x0, case.y0, config)
    ref = case_reference(case, config.epsilon)
    return _cell_from_result(case, config, k, result, ref)


def convergence_sweep(
    case: BenchmarkCase,
    k_list,
    sweep_axis: str,
    grid,
    fixed_overrides: dict | None = None,
    jobs: int = 1,
) -> ConvergenceReport:
    """Run |k_list| x |grid| cells varying one axis; fit slopes per k.

    Cell failures are recorded in their row (status carries the exception
    class name) and the sweep continues.  Fits use only successful rows
    with positive finite error and need at least two of them.
    """
    axis = SWEEP_AXES.get(sweep_axis)
    if axis is None:
        raise ValueError(f"unknown sweep axis {sweep_axis!r}, expected one of {sorted(SWEEP_AXES)}")
    grid = [float(v) for v in grid]
    if not grid:
        raise ValueError("sweep grid is empty")
    fixed = dict(fixed_overrides or {})
    fixed.pop(axis, None)

    # warm the reference cache serially so worker threads only read it
    if case.exact is None:
        if axis == "epsilon":
            for v in grid:
                reference_solution(case, v)
        else:
            reference_solution(case, fixed.get("epsilon", case.epsilon))

    cells = [(k, v) for k in k_list for v in grid]

    def run_one(cell):
        k, v = cell
        over = dict(fixed)
        over[axis] = v
        try:
            return run_cell(case, k, **over)
        except MshomError as exc:
            if k == "coupled":
                config = build_config(case, **over)
            else:
                config = build_config(case, k=int(k), **over)
            return _failed_cell(case, config, k, exc)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(run_one, cells))
    else:
        rows = [run_one(cell) for cell in cells]

    fits: dict[int | str, FitResult] = {}
    for k in k_list:
        pts = [(r.eps if axis == "epsilon" else r.dt if axis == "dt_macro" else r.tau, r.error)
               for r in rows
               if r.k == k and r.status == "ok" and math.isfinite(r.error) and r.error > 0.0]
        if len(pts) >= 2:
            fits[k] = fit_loglog([p[0] for p in pts], [p[1] for p in pts])
    return ConvergenceReport(problem=case.name, axis=axis, rows=rows, fits=fits)
