"""Linear two-scale systems: closure iterates in closed form.

For f = A11 x + A12 y + b1, g = A21 x + A22 y + b2 the order-k closure is
affine, Gamma_k(x) = C_k x + d_k, with

    C_{j+1} = A22^{-1} (-A21 + eps C_j A11 + eps C_j A12 C_j),
    d_{j+1} = A22^{-1} (-b2 + eps C_j b1 + eps C_j A12 d_j),

seeded by the equilibrium C_0 = -A22^{-1} A21, d_0 = -A22^{-1} b2.  The
iteration's fixed point C* satisfies the quadratic (Riccati) relation
eps C A12 C + eps C A11 - A22 C - A21 = 0, and |C_k - C*| = O(eps^{k+1}),
which makes this module the exactness oracle for the recursive solvers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from ._accel import maybe_jit
from .errors import DivergenceError, SingularityError
from .system import TwoScaleSystem

_COND_LIMIT = 1e12


@dataclass(frozen=True)
class LinearTwoScale:
    """Coefficient blocks of an affine two-scale system."""

    A11: np.ndarray
    A12: np.ndarray
    A21: np.ndarray
    A22: np.ndarray
    b1: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        n_x = self.A11.shape[0]
        n_y = self.A22.shape[0]
        expected = {
            "A11": (n_x, n_x),
            "A12": (n_x, n_y),
            "A21": (n_y, n_x),
            "A22": (n_y, n_y),
            "b1": (n_x,),
            "b2": (n_y,),
        }
        for name, shape in expected.items():
            got = getattr(self, name).shape
            if got != shape:
                raise ValueError(f"{name} has shape {got}, expected {shape}")
        sym = 0.5 * (self.A22 + self.A22.T)
        top = float(np.max(np.linalg.eigvalsh(sym)))
        if top > -1e-12:
            raise ValueError(
                f"A22 must be negative definite; max symmetric-part eigenvalue {top:.3e}"
            )

    @property
    def n_x(self) -> int:
        return self.A11.shape[0]

    @property
    def n_y(self) -> int:
        return self.A22.shape[0]

    def dissipativity_rate(self) -> float:
        sym = 0.5 * (self.A22 + self.A22.T)
        return float(-np.max(np.linalg.eigvalsh(sym)))

    def to_two_scale_system(self, name: str = "linear") -> TwoScaleSystem:
        """Wrap the blocks as callables with analytic Jacobians."""
        A11, A12, A21, A22 = self.A11, self.A12, self.A21, self.A22
        b1, b2 = self.b1, self.b2

        def f(x, y):
            return A11 @ x + A12 @ y + b1

        def g(x, y):
            return A21 @ x + A22 @ y + b2

        return TwoScaleSystem(
            name=name,
            n_x=self.n_x,
            n_y=self.n_y,
            f=maybe_jit(f),
            g=maybe_jit(g),
            beta_hat=self.dissipativity_rate(),
            g_jac_y=lambda x, y: A22,
            g_jac_x=lambda x, y: A21,
        )


@dataclass(frozen=True)
class RiccatiSolution:
    C_star: np.ndarray
    d_star: np.ndarray
    residual_C: float
    residual_d: float
    iterations: int


def _equilibrium(linsys: LinearTwoScale, lu):
    c0 = -lu_solve(lu, linsys.A21)
    d0 = -lu_solve(lu, linsys.b2)
    return c0, d0


def riccati_iterates(linsys: LinearTwoScale, epsilon: float, k: int):
    """(C_k, d_k) after k closure updates from the equilibrium seed."""
    if not epsilon > 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    lu = lu_factor(linsys.A22)
    c, d = _equilibrium(linsys, lu)
    for _ in range(k):
        rhs_c = -linsys.A21 + epsilon * (c @ linsys.A11 + c @ linsys.A12 @ c)
        rhs_d = -linsys.b2 + epsilon * (c @ linsys.b1 + c @ linsys.A12 @ d)
        d = lu_solve(lu, rhs_d)
        c = lu_solve(lu, rhs_c)
    return c, d


def _residual_C(linsys: LinearTwoScale, epsilon: float, c: np.ndarray) -> float:
    r = epsilon * (c @ linsys.A12 @ c + c @ linsys.A11) - linsys.A22 @ c - linsys.A21
    return float(np.linalg.norm(r, 2))


def riccati_fixed_point(
    linsys: LinearTwoScale,
    epsilon: float,
    tol: float = 1e-13,
    max_iter: int = 200,
) -> RiccatiSolution:
    """Fixed point (C*, d*) of the closure iteration.

    Iterates the C update until the quadratic residual drops below tol,
    then solves (A22 - eps C* A12) d* = eps C* b1 - b2 directly.  For eps
    beyond the contraction range the loop exhausts max_iter and raises.
    """
    if not epsilon > 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if not tol > 0.0:
        raise ValueError(f"tol must be positive, got {tol}")
    lu = lu_factor(linsys.A22)
    c, _ = _equilibrium(linsys, lu)
    iterations = 0
    # anticipated-blowup path: overflow here is diagnosed, not a warning
    with np.errstate(over="ignore", invalid="ignore"):
        res = _residual_C(linsys, epsilon, c)
        while res > tol:
            if iterations >= max_iter:
                raise DivergenceError(
                    f"closure iteration did not reach tol={tol:.1e} in {max_iter} iterations "
                    f"(residual {res:.3e}); epsilon={epsilon} may be outside the contraction range"
                )
            rhs = -linsys.A21 + epsilon * (c @ linsys.A11 + c @ linsys.A12 @ c)
            c = lu_solve(lu, rhs)
            iterations += 1
            res = _residual_C(linsys, epsilon, c)
            if not np.isfinite(res):
                raise DivergenceError(
                    f"closure iteration produced non-finite residual after {iterations} "
                    f"iterations; epsilon={epsilon} is outside the contraction range"
                )

    a_d = linsys.A22 - epsilon * (c @ linsys.A12)
    cond = np.linalg.cond(a_d)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise SingularityError(
            f"A22 - eps C* A12 is ill-conditioned (cond={cond:.3e}); cannot solve for d*"
        )
    rhs_d = epsilon * (c @ linsys.b1) - linsys.b2
    d = np.linalg.solve(a_d, rhs_d)
    residual_d = float(np.linalg.norm(a_d @ d - rhs_d, 2))
    return RiccatiSolution(
        C_star=c,
        d_star=d,
        residual_C=res,
        residual_d=residual_d,
        iterations=iterations,
    )
