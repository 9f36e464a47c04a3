"""Optional numba acceleration with a pure-numpy fallback.

The fallback is selected by the environment variable ``MSHOM_NUMBA``:
any of ``0``, ``false``, ``off``, ``no`` (case-insensitive) disables jit even when
numba is importable.  Everything downstream asks :func:`enabled` per call,
so flipping the switch with :func:`set_enabled` (used by the backend
benchmark and by tests) takes effect immediately for newly built systems.
"""

from __future__ import annotations

import os

try:
    import numba
    from numba.core.dispatcher import Dispatcher

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only on bare installs
    numba = None
    Dispatcher = ()
    HAS_NUMBA = False


def _env_wants_numba() -> bool:
    flag = os.environ.get("MSHOM_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "off", "no")


_enabled = HAS_NUMBA and _env_wants_numba()


def enabled() -> bool:
    """True when jit-compiled kernels are in use."""
    return _enabled


def set_enabled(value: bool) -> bool:
    """Toggle the jit path (no-op request when numba is missing).

    Returns the effective setting.
    """
    global _enabled
    _enabled = bool(value) and HAS_NUMBA
    return _enabled


def maybe_jit(fn):
    """njit ``fn`` when the jit path is active, else return it unchanged.

    Applied at system build time, so the decision is frozen into each
    system's callables; kernels re-check ``is_jitted`` at call time and
    fall back to the numpy loop for plain callables.
    """
    if _enabled:
        # cache=False: benchmark right-hand sides close over parameters.
        # nogil so threaded sweeps can overlap kernel time.
        return numba.njit(cache=False, nogil=True)(fn)
    return fn


def is_jitted(fn) -> bool:
    return HAS_NUMBA and isinstance(fn, Dispatcher)
