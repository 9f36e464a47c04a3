"""Hot loops behind the micro and coupled solvers.

Each kernel exists twice: an ``@njit`` version specialized per jitted
right-hand side, and a plain-numpy twin with the same expression structure
(same operation order, so the two paths agree to rounding noise).  Dispatch
is per call: the jit path is taken only when acceleration is enabled and
the right-hand sides are numba dispatchers.
"""

from __future__ import annotations

import numpy as np

from . import _accel

if _accel.HAS_NUMBA:
    import numba

    @numba.njit(cache=False, nogil=True)
    def _relax_jit(g, x, eh, y, alpha, m):
        for _ in range(m):
            gv = g(x, y)
            for i in range(y.shape[0]):
                y[i] = y[i] + alpha * (gv[i] - eh[i])
        return y

    @numba.njit(cache=False, nogil=True)
    def _rk4_coupled_record_jit(f, g, eps, dt, n, out_x, out_y):
        nx = out_x.shape[1]
        ny = out_y.shape[1]
        x = out_x[0].copy()
        y = out_y[0].copy()
        h2 = 0.5 * dt
        h2e = 0.5 * dt / eps
        he = dt / eps
        x2 = np.empty(nx)
        y2 = np.empty(ny)
        for step in range(n):
            k1x = f(x, y)
            k1y = g(x, y)
            for i in range(nx):
                x2[i] = x[i] + h2 * k1x[i]
            for i in range(ny):
                y2[i] = y[i] + h2e * k1y[i]
            k2x = f(x2, y2)
            k2y = g(x2, y2)
            for i in range(nx):
                x2[i] = x[i] + h2 * k2x[i]
            for i in range(ny):
                y2[i] = y[i] + h2e * k2y[i]
            k3x = f(x2, y2)
            k3y = g(x2, y2)
            for i in range(nx):
                x2[i] = x[i] + dt * k3x[i]
            for i in range(ny):
                y2[i] = y[i] + he * k3y[i]
            k4x = f(x2, y2)
            k4y = g(x2, y2)
            for i in range(nx):
                x[i] = x[i] + (dt / 6.0) * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i])
            for i in range(ny):
                y[i] = y[i] + (he / 6.0) * (k1y[i] + 2.0 * k2y[i] + 2.0 * k3y[i] + k4y[i])
            out_x[step + 1] = x
            out_y[step + 1] = y

    @numba.njit(cache=False, nogil=True)
    def _rk4_coupled_kahan_jit(f, g, x0, y0, eps, dt, n):
        nx = x0.shape[0]
        ny = y0.shape[0]
        x = x0.copy()
        y = y0.copy()
        cx = np.zeros(nx)
        cy = np.zeros(ny)
        h2 = 0.5 * dt
        h2e = 0.5 * dt / eps
        he = dt / eps
        x2 = np.empty(nx)
        y2 = np.empty(ny)
        for _ in range(n):
            k1x = f(x, y)
            k1y = g(x, y)
            for i in range(nx):
                x2[i] = x[i] + h2 * k1x[i]
            for i in range(ny):
                y2[i] = y[i] + h2e * k1y[i]
            k2x = f(x2, y2)
            k2y = g(x2, y2)
            for i in range(nx):
                x2[i] = x[i] + h2 * k2x[i]
            for i in range(ny):
                y2[i] = y[i] + h2e * k2y[i]
            k3x = f(x2, y2)
            k3y = g(x2, y2)
            for i in range(nx):
                x2[i] = x[i] + dt * k3x[i]
            for i in range(ny):
                y2[i] = y[i] + he * k3y[i]
            k4x = f(x2, y2)
            k4y = g(x2, y2)
            # compensated update keeps 1e6-step references from drifting
            for i in range(nx):
                inc = (dt / 6.0) * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]) - cx[i]
                t = x[i] + inc
                cx[i] = (t - x[i]) - inc
                x[i] = t
            for i in range(ny):
                inc = (he / 6.0) * (k1y[i] + 2.0 * k2y[i] + 2.0 * k3y[i] + k4y[i]) - cy[i]
                t = y[i] + inc
                cy[i] = (t - y[i]) - inc
                y[i] = t
        return x, y


def _relax_py(g, x, eh, y, alpha, m):
    for step in range(m):
        gv = np.asarray(g(x, y))
        y = y + alpha * (gv - eh)
        if not np.all(np.isfinite(y)):
            from .errors import NumericalFailureError

            raise NumericalFailureError(
                f"micro relaxation diverged at step {step + 1}", step=step + 1
            )
    return y


def _rk4_coupled_steps_py(f, g, x, y, eps, dt, n, out_x=None, out_y=None, kahan=False):
    nx = x.shape[0]
    ny = y.shape[0]
    h2 = 0.5 * dt
    h2e = 0.5 * dt / eps
    he = dt / eps
    cx = np.zeros(nx)
    cy = np.zeros(ny)
    for step in range(n):
        k1x = np.asarray(f(x, y))
        k1y = np.asarray(g(x, y))
        xs = x + h2 * k1x
        ys = y + h2e * k1y
        k2x = np.asarray(f(xs, ys))
        k2y = np.asarray(g(xs, ys))
        xs = x + h2 * k2x
        ys = y + h2e * k2y
        k3x = np.asarray(f(xs, ys))
        k3y = np.asarray(g(xs, ys))
        xs = x + dt * k3x
        ys = y + he * k3y
        k4x = np.asarray(f(xs, ys))
        k4y = np.asarray(g(xs, ys))
        incx = (dt / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        incy = (he / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        if kahan:
            incx = incx - cx
            tx = x + incx
            cx = (tx - x) - incx
            x = tx
            incy = incy - cy
            ty = y + incy
            cy = (ty - y) - incy
            y = ty
        else:
            x = x + incx
            y = y + incy
        if out_x is not None:
            out_x[step + 1] = x
            out_y[step + 1] = y
    return x, y


def _use_jit(*fns) -> bool:
    return _accel.enabled() and all(_accel.is_jitted(fn) for fn in fns)


def relax(g, x, eh, y0, alpha, m):
    """Run m damped-relaxation steps y <- y + alpha*(g(x,y) - eh).

    Returns the final iterate; non-finite results raise with the step
    index located by a plain rerun (failure path only).
    """
    if m == 0:
        return y0.copy()
    if _use_jit(g):
        y = _relax_jit(g, x, eh, y0.copy(), alpha, m)
        if np.all(np.isfinite(y)):
            return y
        return _relax_py(g, x, eh, y0.copy(), alpha, m)
    return _relax_py(g, x, eh, y0.copy(), alpha, m)


def rk4_coupled_record(f, g, eps, dt, n, out_x, out_y):
    """Advance the coupled pair n RK4 steps, recording every state.

    Row 0 of out_x/out_y holds the initial state; rows 1..n are filled.
    """
    if n == 0:
        return
    if _use_jit(f, g):
        _rk4_coupled_record_jit(f, g, eps, dt, n, out_x, out_y)
    else:
        _rk4_coupled_steps_py(
            f, g, out_x[0].copy(), out_y[0].copy(), eps, dt, n, out_x, out_y
        )


def rk4_coupled_final(f, g, x0, y0, eps, dt, n, kahan=False):
    """Endpoint of n coupled RK4 steps; optionally compensated summation."""
    if n == 0:
        return x0.copy(), y0.copy()
    if _use_jit(f, g):
        if kahan:
            return _rk4_coupled_kahan_jit(f, g, x0, y0, eps, dt, n)
        nx = x0.shape[0]
        ny = y0.shape[0]
        out_x = np.empty((n + 1, nx))
        out_y = np.empty((n + 1, ny))
        out_x[0] = x0
        out_y[0] = y0
        _rk4_coupled_record_jit(f, g, eps, dt, n, out_x, out_y)
        return out_x[n].copy(), out_y[n].copy()
    return _rk4_coupled_steps_py(f, g, x0.copy(), y0.copy(), eps, dt, n, kahan=kahan)
