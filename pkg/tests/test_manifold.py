import numpy as np
import pytest
from scipy.optimize import brentq

from mshom import (
    ManifoldApproximator,
    ManifoldConfig,
    MicroConfig,
    SingularityError,
    TwoScaleSystem,
    directional_difference,
    fit_loglog,
    gamma1_analytic,
    hmm_type1,
    hmm_type2,
    micro_call_count,
)

EXACT_MICRO = MicroConfig(alpha=0.5, m_steps=200)


def _enzyme_closure(xv: float, c: float = 0.5):
    """Closed forms for the enzyme fast field g = x - (x+1)y."""
    gam = xv / (xv + 1.0)
    F = -xv + (xv + c) * gam
    gam1 = -F / (xv + 1.0) ** 3
    return gam, gam1


def test_config_validation():
    with pytest.raises(ValueError):
        ManifoldConfig(k=-1)
    with pytest.raises(ValueError):
        ManifoldConfig(algorithm="type3")
    with pytest.raises(ValueError):
        ManifoldConfig(diff_scheme="spectral")
    with pytest.raises(ValueError):
        ManifoldConfig(tau=0.0)


def test_algorithm_mismatch_rejected(cases):
    sys_ = cases["enzyme"].system
    cfg1 = ManifoldConfig(k=0, algorithm="type1", micro=EXACT_MICRO)
    cfg2 = ManifoldConfig(k=0, algorithm="type2", micro=EXACT_MICRO)
    with pytest.raises(ValueError):
        hmm_type1(sys_, np.array([1.0]), 1e-3, cfg2)
    with pytest.raises(ValueError):
        hmm_type2(sys_, np.array([1.0]), 1e-3, cfg1)


def test_order_zero_recovers_equilibrium(cases):
    sys_ = cases["enzyme"].system
    cfg = ManifoldConfig(k=0, algorithm="type1", micro=EXACT_MICRO)
    for xv in (0.3, 0.8, 1.7):
        ev = hmm_type1(sys_, np.array([xv]), 1e-3, cfg)
        gam, _ = _enzyme_closure(xv)
        assert abs(ev.value[0] - gam) < 1e-14
        assert ev.micro_calls == 1


def test_gamma1_closed_form(cases):
    sys_ = cases["enzyme"].system
    for xv in (0.3, 0.8, 1.7):
        gam, gam1 = _enzyme_closure(xv)
        got = gamma1_analytic(sys_, np.array([xv]), np.array([gam]))
        assert abs(got[0] - gam1) < 1e-14


def test_first_order_expansion_value(cases):
    sys_ = cases["enzyme"].system
    eps = 1e-3
    cfg = ManifoldConfig(k=1, algorithm="type1", micro=EXACT_MICRO)
    for xv in (0.3, 0.8, 1.7):
        gam, gam1 = _enzyme_closure(xv)
        ev = hmm_type1(sys_, np.array([xv]), eps, cfg)
        assert abs(ev.value[0] - (gam + eps * gam1)) < 1e-14
        assert ev.slope is None
        assert ev.micro_calls == 1


def test_iterative_first_order_matches_expansion_on_linear_fast_field(cases):
    # g linear in y makes the first iterate equal gamma + eps*gamma1 exactly;
    # what remains is the tau^2 differencing error in the slope target
    sys_ = cases["enzyme"].system
    eps = 1e-3
    cfg = ManifoldConfig(k=1, algorithm="type2", diff_scheme="central", tau=1e-6,
                         micro=EXACT_MICRO)
    for xv in (0.3, 0.8, 1.7):
        gam, gam1 = _enzyme_closure(xv)
        ev = hmm_type2(sys_, np.array([xv]), eps, cfg)
        assert abs(ev.value[0] - (gam + eps * gam1)) < 1e-12


def test_iterative_first_order_defect_is_second_order(cases):
    # forced VdP fast field is cubic in y, so the order-two coefficient
    # -g_yy*gamma1^2/(2 g_y) is nonzero and the defect must scale like eps^2
    sys_ = cases["forced_vdp"].system
    eps_grid = np.logspace(-4, -2, 6)
    xs = [np.array([x1, x2]) for x1 in (1.0, 2.0, 3.0) for x2 in (0.1, 0.6)]
    errs = []
    for eps in eps_grid:
        cfg = ManifoldConfig(k=1, algorithm="type2", diff_scheme="central", tau=1e-6,
                             micro=MicroConfig(alpha=0.1, m_steps=3000))
        ap = ManifoldApproximator(sys_, eps, cfg)
        worst = 0.0
        for x in xs:
            gam = brentq(lambda yv: sys_.g(x, np.array([yv]))[0], 1.5, 6.0,
                         xtol=1e-15, rtol=8.9e-16)
            gam1 = gamma1_analytic(sys_, x, np.array([gam]))[0]
            got = ap.evaluate(x).value[0]
            worst = max(worst, abs(got - (gam + eps * gam1)))
        errs.append(worst)
    fit = fit_loglog(eps_grid, np.array(errs))
    assert fit.slope > 1.8
    assert errs[0] < errs[-1]


def test_directional_difference_exact_on_affine():
    A = np.array([[2.0, -1.0], [0.5, 3.0]])
    b = np.array([0.3, -0.7])
    gamma = lambda x: A @ x + b
    x = np.array([0.4, -1.2])
    v = np.array([1.0, 2.0])
    for scheme in ("forward", "central"):
        got = directional_difference(gamma, x, v, 1e-4, scheme)
        assert np.allclose(got, A @ v, atol=1e-10)


def test_central_difference_kills_quadratic_term():
    gamma = lambda x: np.array([x[0] ** 2])
    x, v, tau = np.array([1.0]), np.array([1.0]), 1e-3
    fwd = directional_difference(gamma, x, v, tau, "forward")[0]
    cen = directional_difference(gamma, x, v, tau, "central")[0]
    assert abs(fwd - 2.0) > 5e-4       # O(tau) bias
    assert abs(cen - 2.0) < 1e-9       # exact for quadratics up to rounding


COUNTS = [
    ("type2", "forward", [1, 3, 7, 15, 31]),
    ("type2", "central", [1, 4, 13, 40]),
    ("type1", "forward", [1, 1, 2, 5, 11]),
    ("type1", "central", [1, 1, 3, 10, 31]),
]


@pytest.mark.parametrize("alg,scheme,expected", COUNTS)
def test_micro_call_count_closed_forms(alg, scheme, expected):
    got = [micro_call_count(alg, scheme, k) for k in range(len(expected))]
    assert got == expected


@pytest.mark.parametrize("alg,scheme,expected", COUNTS)
def test_micro_call_counter_instrumented(cases, alg, scheme, expected):
    sys_ = cases["naive"].system
    for k, want in enumerate(expected):
        cfg = ManifoldConfig(k=k, algorithm=alg, diff_scheme=scheme, tau=1e-6,
                             micro=MicroConfig(alpha=1.0, m_steps=1))
        ap = ManifoldApproximator(sys_, 1e-5, cfg)
        ap.evaluate(np.array([1.0]))
        assert ap.total_micro_calls == want


def test_memoized_reevaluation_is_free(cases):
    sys_ = cases["naive"].system
    cfg = ManifoldConfig(k=2, algorithm="type2", diff_scheme="forward", tau=1e-6,
                         micro=MicroConfig(alpha=1.0, m_steps=1), memoize=True)
    ap = ManifoldApproximator(sys_, 1e-5, cfg)
    x = np.array([1.0])
    first = ap.evaluate(x)
    calls_after_first = ap.total_micro_calls
    second = ap.evaluate(x)
    assert ap.total_micro_calls == calls_after_first
    assert np.array_equal(first.value, second.value)


def test_guess_threads_into_relaxation(cases):
    # k=0, M=1: the result is exactly one update away from the guess
    sys_ = cases["enzyme"].system
    x, guess = np.array([0.8]), np.array([0.25])
    cfg = ManifoldConfig(k=0, algorithm="type2",
                         micro=MicroConfig(alpha=0.5, m_steps=1))
    ev = hmm_type2(sys_, x, 1e-3, cfg, y_guess=guess)
    expected = guess + 0.5 * sys_.g(x, guess)
    assert np.array_equal(ev.value, expected)


def test_flat_fast_jacobian_raises():
    sys_ = TwoScaleSystem(
        name="flat", n_x=1, n_y=1,
        f=lambda x, y: -x + y,
        g=lambda x, y: -y**3,
        beta_hat=1.0,
        g_jac_y=lambda x, y: np.array([[-3.0 * y[0] ** 2]]),
        g_jac_x=lambda x, y: np.array([[0.0]]),
    )
    cfg = ManifoldConfig(k=1, algorithm="type1",
                         micro=MicroConfig(alpha=1.0, m_steps=1,
                                           initial_guess_policy="zero"))
    with pytest.raises(SingularityError):
        hmm_type1(sys_, np.array([0.0]), 1e-3, cfg)
