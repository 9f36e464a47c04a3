"""Successive slow-manifold corrections.

The order-k fast closure Gamma_k(x, eps) is built recursively: the order-0
value is the relaxed equilibrium, and each higher order re-solves the
stationarity condition g(x, y) = eps * h with h an advective directional
derivative of the previous order along the slow field.  Two variants are
implemented:

- ``type2``: the fully recursive form; every order ends in a micro solve
  with the shifted target.
- ``type1``: replaces the order-1 micro solve by the analytic correction
  gamma + eps * gamma_1 (two Jacobian solves), and at order 2 replaces the
  micro solve by one linear solve with G_y; orders >= 3 recurse as type2
  does but with type-1 children.

Cost in micro calls is therefore algorithm- and scheme-dependent;
:func:`micro_call_count` gives the closed forms the instrumented counters
are tested against.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import SingularityError
from .micro import MicroConfig, relax_solve
from .system import TwoScaleSystem, jacobian_g

ALGORITHMS = ("type1", "type2")
DIFF_SCHEMES = ("forward", "central")

# Conditioning guard for the G_y solves in the type-1 branches.
COND_LIMIT = 1e12


@dataclass(frozen=True)
class ManifoldConfig:
    """Order, variant, and differencing parameters for one closure."""

    k: int = 0
    algorithm: str = "type2"
    diff_scheme: str = "forward"
    tau: float = 1e-6
    micro: MicroConfig = field(default_factory=MicroConfig)
    memoize: bool = False

    def __post_init__(self):
        if self.k < 0:
            raise ValueError(f"k must be >= 0, got {self.k}")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}, expected one of {ALGORITHMS}")
        if self.diff_scheme not in DIFF_SCHEMES:
            raise ValueError(
                f"unknown diff_scheme {self.diff_scheme!r}, expected one of {DIFF_SCHEMES}"
            )
        if not self.tau > 0.0:
            raise ValueError(f"tau must be positive, got {self.tau}")


@dataclass(frozen=True)
class ManifoldEval:
    """One closure evaluation: value, advective slope, micro-solve count.

    slope is None when the variant computes no directional derivative
    (order 0, and type-1 order 1); callers use it for warm starts.
    """

    value: np.ndarray
    slope: np.ndarray | None
    micro_calls: int


def directional_difference(
    gamma: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    v: np.ndarray,
    tau: float,
    scheme: str = "forward",
) -> np.ndarray:
    """Directional difference of a fast-valued map along v with step tau."""
    if not tau > 0.0:
        raise ValueError(f"tau must be positive, got {tau}")
    if scheme not in DIFF_SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}, expected one of {DIFF_SCHEMES}")
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if scheme == "forward":
        return (np.asarray(gamma(x + tau * v)) - np.asarray(gamma(x))) / tau
    return (np.asarray(gamma(x + tau * v)) - np.asarray(gamma(x - tau * v))) / (2.0 * tau)


def _solve_gy(gy: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    cond = np.linalg.cond(gy)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularityError(f"fast Jacobian G_y is ill-conditioned (cond={cond:.3e})")
    return np.linalg.solve(gy, rhs)


def _gamma1_from_jacobians(gy, gx, f_val):
    # gamma_1 = -G_y^{-2} G_x F, realized as two solves against G_y
    t = _solve_gy(gy, gx @ f_val)
    return -_solve_gy(gy, t)


def gamma1_analytic(system: TwoScaleSystem, x: np.ndarray, gamma_x: np.ndarray) -> np.ndarray:
    """First-order correction coefficient at the equilibrium gamma(x).

    Evaluates the Jacobians of g at (x, gamma_x) and returns
    -G_y^{-2} G_x f(x, gamma_x) without forming an inverse.
    """
    x = np.asarray(x, dtype=float)
    gamma_x = np.asarray(gamma_x, dtype=float)
    gy, gx = jacobian_g(system, x, gamma_x)
    f_val = np.asarray(system.f(x, gamma_x), dtype=float)
    return _gamma1_from_jacobians(gy, gx, f_val)


def micro_call_count(algorithm: str, diff_scheme: str, k: int) -> int:
    """Closed-form micro-solve count for one closure evaluation."""
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if diff_scheme not in DIFF_SCHEMES:
        raise ValueError(f"unknown diff_scheme {diff_scheme!r}")
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    if algorithm == "type2":
        if diff_scheme == "forward":
            return 2 ** (k + 1) - 1
        return (3 ** (k + 1) - 1) // 2
    if k <= 1:
        return 1
    if diff_scheme == "forward":
        return 3 * 2 ** (k - 2) - 1
    if k == 2:
        return 3
    return (7 * 3 ** (k - 2) - 1) // 2


class ManifoldApproximator:
    """Evaluator for one closure; carries cumulative micro-call counters.

    Instances are cheap and hold no cross-evaluation numerical state (warm
    starts are threaded by the caller), but the counter and optional memo
    cache make them non-shareable across concurrent workers: use one
    instance per worker.
    """

    def __init__(self, system: TwoScaleSystem, epsilon: float, config: ManifoldConfig):
        if not epsilon > 0.0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        self.system = system
        self.epsilon = float(epsilon)
        self.config = config
        self.total_micro_calls = 0
        self._memo: dict[tuple[int, bytes], tuple[np.ndarray, np.ndarray | None]] = {}

    def evaluate(self, x: np.ndarray, y_guess: np.ndarray | None = None) -> ManifoldEval:
        x = np.asarray(x, dtype=float)
        value, slope, calls = self._eval(x, self.config.k, y_guess)
        self.total_micro_calls += calls
        return ManifoldEval(value=value, slope=slope, micro_calls=calls)

    # -- recursion ---------------------------------------------------------

    def _relax(self, x, h, guess):
        return relax_solve(self.system, x, h, guess, self.epsilon, self.config.micro)

    def _eval(self, x, k, guess):
        if self.config.memoize:
            key = (k, x.tobytes())
            hit = self._memo.get(key)
            if hit is not None:
                return hit[0], hit[1], 0
        out = self._eval_inner(x, k, guess)
        if self.config.memoize:
            self._memo[key] = (out[0], out[1])
        return out

    def _eval_inner(self, x, k, guess):
        if k == 0:
            return self._relax(x, None, guess), None, 1
        if self.config.algorithm == "type1":
            if k == 1:
                return self._order1_analytic(x, guess)[:3]
            if k == 2:
                return self._order2_jacobian(x, guess)
        return self._recurse(x, k, guess)

    def _order1_analytic(self, x, guess):
        sys = self.system
        gamma = self._relax(x, None, guess)
        gy, gx = jacobian_g(sys, x, gamma)
        f_val = np.asarray(sys.f(x, gamma), dtype=float)
        gamma1 = _gamma1_from_jacobians(gy, gx, f_val)
        return gamma + self.epsilon * gamma1, None, 1, gamma, gy

    def _order2_jacobian(self, x, guess):
        # order-1 value and the Jacobian at (x, gamma) are reused for the
        # final linear update, so the order-1 branch is inlined here
        sys = self.system
        g1_val, _, calls, gamma, gy = self._order1_analytic(x, guess)
        f1 = np.asarray(sys.f(x, g1_val), dtype=float)
        tau = self.config.tau
        vp, _, cp = self._eval(x + tau * f1, 1, gamma)
        calls += cp
        if self.config.diff_scheme == "forward":
            slope = (vp - g1_val) / tau
        else:
            vm, _, cm = self._eval(x - tau * f1, 1, gamma)
            calls += cm
            slope = (vp - vm) / (2.0 * tau)
        resid = self.epsilon * slope - np.asarray(sys.g(x, g1_val), dtype=float)
        value = g1_val + _solve_gy(gy, resid)
        return value, slope, calls

    def _recurse(self, x, k, guess):
        sys = self.system
        v0, _, calls = self._eval(x, k - 1, guess)
        f_val = np.asarray(sys.f(x, v0), dtype=float)
        tau = self.config.tau
        vp, _, cp = self._eval(x + tau * f_val, k - 1, v0)
        calls += cp
        if self.config.diff_scheme == "forward":
            slope = (vp - v0) / tau
        else:
            vm, _, cm = self._eval(x - tau * f_val, k - 1, v0)
            calls += cm
            slope = (vp - vm) / (2.0 * tau)
        value = self._relax(x, slope, v0)
        return value, slope, calls + 1


def _eval_with(system, x, epsilon, config, algorithm, y_guess):
    if config.algorithm != algorithm:
        raise ValueError(f"config.algorithm is {config.algorithm!r}, expected {algorithm!r}")
    return ManifoldApproximator(system, epsilon, config).evaluate(x, y_guess)


def hmm_type1(
    system: TwoScaleSystem,
    x: np.ndarray,
    epsilon: float,
    config: ManifoldConfig,
    y_guess: np.ndarray | None = None,
) -> ManifoldEval:
    """One type-1 closure evaluation at x."""
    return _eval_with(system, x, epsilon, config, "type1", y_guess)


def hmm_type2(
    system: TwoScaleSystem,
    x: np.ndarray,
    epsilon: float,
    config: ManifoldConfig,
    y_guess: np.ndarray | None = None,
) -> ManifoldEval:
    """One type-2 closure evaluation at x."""
    return _eval_with(system, x, epsilon, config, "type2", y_guess)
