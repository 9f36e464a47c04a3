"""Parity between the jitted kernels and the pure-numpy fallback.

Both paths implement the same per-component arithmetic, so results must
agree to rounding; the tolerances below were measured and frozen.
"""

import numpy as np
import pytest

import mshom
from mshom import _accel, _kernels
from mshom.bench import registry, reference_solution

pytestmark = pytest.mark.skipif(not _accel.HAS_NUMBA, reason="numba not installed")


def _system(name: str):
    return registry()[name].system


def test_env_flag_parsing(monkeypatch):
    probe = _accel._env_wants_numba
    for raw, want in (("0", False), ("false", False), ("off", False),
                      ("1", True), ("no", False), ("yes", True), ("", True)):
        monkeypatch.setenv("MSHOM_NUMBA", raw)
        assert probe() is want, raw
    monkeypatch.delenv("MSHOM_NUMBA")
    assert probe() is True


def test_maybe_jit_respects_toggle(restore_accel):
    _accel.set_enabled(True)
    jitted = _accel.maybe_jit(lambda x, y: x + y)
    assert _accel.is_jitted(jitted)
    _accel.set_enabled(False)
    plain = _accel.maybe_jit(lambda x, y: x + y)
    assert not _accel.is_jitted(plain)


def test_registry_keys_cache_by_backend(restore_accel):
    _accel.set_enabled(True)
    fast = _system("naive")
    _accel.set_enabled(False)
    slow = _system("naive")
    assert fast is not slow
    assert _accel.is_jitted(fast.f)
    assert not _accel.is_jitted(slow.f)


def _relax_both(m_steps: int):
    out = {}
    for enabled in (True, False):
        _accel.set_enabled(enabled)
        sys_ = _system("enzyme")
        out[enabled] = _kernels.relax(
            sys_.g, np.array([0.8]), np.array([1e-3 * 2.0]), np.array([0.1]),
            0.5, m_steps)
    return out


def test_relax_parity(restore_accel):
    for m in (1, 7, 100):
        res = _relax_both(m)
        assert np.array_equal(res[True], res[False]), m


def test_coupled_step_parity(restore_accel):
    results = {}
    for enabled in (True, False):
        _accel.set_enabled(enabled)
        sys_ = _system("enzyme")
        results[enabled] = _kernels.rk4_coupled_final(
            sys_.f, sys_.g, np.array([1.0]), np.array([0.0]), 1e-2, 1e-3, 500)
    np.testing.assert_allclose(results[True][0], results[False][0], rtol=0, atol=5e-15)
    np.testing.assert_allclose(results[True][1], results[False][1], rtol=0, atol=5e-15)


def test_recorded_trajectory_matches_final(restore_accel):
    _accel.set_enabled(True)
    sys_ = _system("enzyme")
    n = 200
    out_x = np.empty((n + 1, 1))
    out_y = np.empty((n + 1, 1))
    out_x[0], out_y[0] = 1.0, 0.0
    _kernels.rk4_coupled_record(sys_.f, sys_.g, 1e-2, 1e-3, n, out_x, out_y)
    xf, yf = _kernels.rk4_coupled_final(
        sys_.f, sys_.g, np.array([1.0]), np.array([0.0]), 1e-2, 1e-3, n)
    assert np.array_equal(out_x[-1], xf)
    assert np.array_equal(out_y[-1], yf)


def test_full_cell_parity(restore_accel):
    errors = {}
    for enabled in (True, False):
        _accel.set_enabled(enabled)
        case = registry()["enzyme"]
        row = mshom.run_cell(case, 1, epsilon=1e-3)
        errors[enabled] = row.error
    assert errors[True] == pytest.approx(errors[False], rel=1e-9)


def test_reference_parity(restore_accel):
    refs = {}
    for enabled in (True, False):
        _accel.set_enabled(enabled)
        case = registry()["enzyme"]
        refs[enabled] = reference_solution(case, 5e-3, dt_fine=1e-4)
    np.testing.assert_allclose(refs[True], refs[False], rtol=0, atol=1e-14)
