import numpy as np
import pytest

import mshom
from mshom import (
    build_config,
    case_reference,
    convergence_sweep,
    fit_loglog,
    naive_exact,
    reference_solution,
    registry,
    run_cell,
)

BUNDLED = {"naive", "enzyme", "forced_vdp", "chua", "vdp"}


def test_registry_contents(cases):
    assert set(cases) == BUNDLED
    for case in cases.values():
        assert case.epsilon > 0
        assert case.dt_coupled <= case.dt_macro <= case.t_final
        assert case.system.n_x >= 1 and case.system.n_y >= 1
    assert cases["naive"].exact is not None
    assert cases["enzyme"].exact is None


def test_registry_caches_systems(cases):
    again = registry()
    for name in BUNDLED:
        assert again[name].system is cases[name].system


def test_exact_solution_boundary_and_floor(cases):
    case = cases["naive"]
    # the literal closed form carries one-ulp rounding even at t=0
    assert naive_exact(0.0) == pytest.approx(1.0, abs=2e-15)
    # closed form evaluated in doubles carries a ~1.2e-9 cancellation floor
    # at eps=1e-5; the integrated reference must sit within 1.5e-9 of it
    ref = reference_solution(case, case.epsilon)
    gap = abs(naive_exact(case.t_final, epsilon=case.epsilon) - ref[0])
    assert gap < 1.5e-9


def test_case_reference_prefers_exact(cases):
    case = cases["naive"]
    ref = case_reference(case, case.epsilon)
    assert ref.shape == (1,)
    assert ref[0] == naive_exact(case.t_final, epsilon=case.epsilon)


def test_reference_solution_cached(cases):
    # cache hits hand out defensive copies of the stored state
    case = cases["enzyme"]
    a = reference_solution(case, 5e-3, dt_fine=1e-4)
    a_again = reference_solution(case, 5e-3, dt_fine=1e-4)
    assert np.array_equal(a, a_again)
    assert a is not a_again
    a_again[0] = np.nan
    assert np.isfinite(reference_solution(case, 5e-3, dt_fine=1e-4)[0])


def test_fit_loglog_recovers_power_law():
    xs = np.logspace(-3, -1, 6)
    fit = fit_loglog(xs, 3.0 * xs**2)
    assert abs(fit.slope - 2.0) < 1e-10
    assert fit.r2 > 1.0 - 1e-12
    assert fit.n_points == 6
    with pytest.raises(ValueError):
        fit_loglog(xs, 0.0 * xs)
    with pytest.raises(ValueError):
        fit_loglog(xs[:1], np.array([1.0]))


def test_build_config_routes_overrides(cases):
    case = cases["enzyme"]
    cfg = build_config(case, epsilon=1e-3, dt_macro=2e-2, k=2, tau=1e-4,
                       m_steps=7, alpha=0.25, warm_start=False, n_p=5)
    assert cfg.epsilon == 1e-3
    assert cfg.dt_macro == 2e-2
    assert cfg.n_p == 5
    assert cfg.warm_start is False
    assert cfg.manifold.k == 2
    assert cfg.manifold.tau == 1e-4
    assert cfg.manifold.micro.m_steps == 7
    assert cfg.manifold.micro.alpha == 0.25
    # untouched fields keep the case defaults
    assert cfg.manifold.algorithm == case.algorithm
    assert cfg.manifold.diff_scheme == case.diff_scheme


def test_build_config_rejects_unknown_key(cases):
    with pytest.raises(ValueError, match="dt_micro"):
        build_config(cases["enzyme"], dt_micro=1e-4)


def test_run_cell_row(cases):
    row = run_cell(cases["enzyme"], 1, epsilon=1e-3)
    assert row.status == "ok"
    assert row.problem == "enzyme"
    assert row.k == 1
    assert row.eps == 1e-3
    assert 0.0 < row.error < 1.0
    assert row.micro_calls > 0
    assert row.t_c > 0.0
    assert row.wall_ms > 0.0


def test_run_cell_coupled_baseline(cases):
    row = run_cell(cases["naive"], "coupled")
    assert row.k == "coupled"
    assert row.micro_calls == 0
    assert row.t_c == cases["naive"].t_final
    assert row.error < 1e-8


def test_sweep_rejects_bad_axis(cases):
    with pytest.raises(ValueError):
        convergence_sweep(cases["naive"], [0], "beta", [1.0])
    with pytest.raises(ValueError):
        convergence_sweep(cases["naive"], [0], "eps", [])


def test_sweep_parallel_matches_serial(cases):
    case = cases["naive"]
    grid = [1e-5, 2e-5, 4e-5]
    serial = convergence_sweep(case, [0, 1], "eps", grid, jobs=1)
    threaded = convergence_sweep(case, [0, 1], "eps", grid, jobs=3)
    assert [r.error for r in serial.rows] == [r.error for r in threaded.rows]
    assert [r.k for r in serial.rows] == [r.k for r in threaded.rows]
    assert serial.fits[0].slope == pytest.approx(threaded.fits[0].slope, rel=0)


def test_sweep_records_cell_failure(cases):
    # alpha=3 diverges the micro relaxation; the sweep keeps going
    with np.errstate(over="ignore", invalid="ignore"):
        rep = convergence_sweep(cases["naive"], [0], "eps", [1e-5],
                                {"alpha": 3.0, "m_steps": 2000})
    row = rep.rows[0]
    assert row.status == "NumericalFailureError"
    assert not np.isfinite(row.error)
    assert rep.fits.get(0) is None


def test_sweep_fit_matches_row_refit(cases):
    case = cases["naive"]
    grid = [1e-5, 3e-5, 1e-4]
    rep = convergence_sweep(case, [1], "eps", grid)
    errs = np.array([r.error for r in rep.rows])
    eps = np.array([r.eps for r in rep.rows])
    refit = fit_loglog(eps, errs)
    assert rep.fits[1].slope == pytest.approx(refit.slope, rel=1e-12)
