import dataclasses

import numpy as np
import pytest

from mshom import TwoScaleSystem, check_dissipativity, jacobian_g


def _toy(with_jacs: bool = True) -> TwoScaleSystem:
    def f(x, y):
        return np.array([-x[0] + x[1] * y[0], x[0] * y[1]])

    def g(x, y):
        return np.array([x[0] - 2.0 * y[0] + 0.1 * y[1] ** 2,
                         x[1] - 3.0 * y[1]])

    def g_jac_y(x, y):
        return np.array([[-2.0, 0.2 * y[1]], [0.0, -3.0]])

    def g_jac_x(x, y):
        return np.array([[1.0, 0.0], [0.0, 1.0]])

    return TwoScaleSystem(
        name="toy", n_x=2, n_y=2, f=f, g=g, beta_hat=1.5,
        g_jac_y=g_jac_y if with_jacs else None,
        g_jac_x=g_jac_x if with_jacs else None,
    )


def test_rejects_bad_dimensions():
    with pytest.raises(ValueError):
        TwoScaleSystem(name="bad", n_x=0, n_y=1, f=lambda x, y: x,
                       g=lambda x, y: -y, beta_hat=1.0)


def test_rejects_nonpositive_rate():
    with pytest.raises(ValueError):
        TwoScaleSystem(name="bad", n_x=1, n_y=1, f=lambda x, y: x,
                       g=lambda x, y: -y, beta_hat=0.0)


def test_is_frozen():
    sys_ = _toy()
    with pytest.raises(dataclasses.FrozenInstanceError):
        sys_.beta_hat = 2.0


def test_check_shapes_catches_wrong_field_output():
    sys_ = _toy()
    sys_.check_shapes(np.zeros(2), np.zeros(2))
    fat_f = TwoScaleSystem(name="bad", n_x=2, n_y=1,
                           f=lambda x, y: np.zeros(3),
                           g=lambda x, y: -y, beta_hat=1.0)
    with pytest.raises(ValueError):
        fat_f.check_shapes(np.zeros(2), np.zeros(1))
    short_g = TwoScaleSystem(name="bad", n_x=1, n_y=2,
                             f=lambda x, y: x,
                             g=lambda x, y: np.zeros(1), beta_hat=1.0)
    with pytest.raises(ValueError):
        short_g.check_shapes(np.zeros(1), np.zeros(2))


def test_dissipativity_rate_linear_fast_field(cases):
    # naive fast field is x - y: the one-sided rate is exactly 1
    rate = check_dissipativity(cases["naive"].system, seed=0)
    assert abs(rate - 1.0) < 1e-12


def test_dissipativity_rate_state_dependent(cases):
    # enzyme g_y = -(x+1); sampling x around 1 keeps the rate near 1+x > 1
    rate = check_dissipativity(cases["enzyme"].system, seed=0, x_center=1.0)
    assert rate > 1.0
    assert rate < 3.0


def test_dissipativity_deterministic(cases):
    a = check_dissipativity(cases["enzyme"].system, seed=3, x_center=1.0)
    b = check_dissipativity(cases["enzyme"].system, seed=3, x_center=1.0)
    assert a == b


def test_jacobian_analytic_matches_finite_difference(rng):
    with_jacs = _toy(True)
    without = _toy(False)
    for _ in range(5):
        x = rng.standard_normal(2)
        y = rng.standard_normal(2)
        gy_a, gx_a = jacobian_g(with_jacs, x, y)
        gy_fd, gx_fd = jacobian_g(without, x, y)
        assert np.allclose(gy_a, gy_fd, atol=1e-7)
        assert np.allclose(gx_a, gx_fd, atol=1e-7)


def test_jacobian_shapes(cases):
    sys_ = cases["forced_vdp"].system
    gy, gx = jacobian_g(sys_, np.array([1.0, 0.5]), np.array([2.2]))
    assert gy.shape == (1, 1)
    assert gx.shape == (1, 2)
