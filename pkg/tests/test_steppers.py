import numpy as np
import pytest

from mshom import NumericalFailureError, SCHEMES, VectorField, euler_step, rk4_step
from mshom.bench import fit_loglog
from mshom.steppers import get_scheme

DECAY = VectorField(dim=1, eval=lambda s: -s)


def _integrate(step, dt: float, n: int) -> float:
    s = np.array([1.0])
    for _ in range(n):
        s = step(DECAY, s, dt)
    return float(s[0])


@pytest.mark.parametrize("step,order", [(euler_step, 1), (rk4_step, 4)])
def test_convergence_order(step, order):
    dts = np.array([0.2, 0.1, 0.05, 0.025])
    errs = np.array([abs(_integrate(step, dt, int(round(1.0 / dt))) - np.exp(-1.0))
                     for dt in dts])
    fit = fit_loglog(dts, errs)
    assert abs(fit.slope - order) < 0.15


def test_rk4_matches_degree_four_taylor():
    # on s' = lam*s one step is exactly the quartic Taylor polynomial
    lam, dt = -0.7, 0.3
    field = VectorField(dim=1, eval=lambda s: lam * s)
    z = lam * dt
    expected = 1.0 + z + z**2 / 2 + z**3 / 6 + z**4 / 24
    got = rk4_step(field, np.array([1.0]), dt)[0]
    assert abs(got - expected) < 1e-15


def test_euler_single_step():
    got = euler_step(DECAY, np.array([2.0]), 0.25)[0]
    assert got == 2.0 + 0.25 * (-2.0)


def test_nonfinite_state_raises():
    bad = VectorField(dim=1, eval=lambda s: np.array([np.inf]))
    with pytest.raises(NumericalFailureError):
        rk4_step(bad, np.array([1.0]), 0.1)
    with pytest.raises(NumericalFailureError):
        euler_step(bad, np.array([1.0]), 0.1)


def test_scheme_registry():
    assert set(SCHEMES) == {"euler", "rk4"}
    assert get_scheme("rk4") is rk4_step
    assert get_scheme("euler") is euler_step
    with pytest.raises(ValueError):
        get_scheme("rk2")
