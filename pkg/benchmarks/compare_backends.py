"""Time the jit kernels against the pure-numpy fallback.

Runs each workload on both backends (numpy always; numba when importable),
reports median wall time over --repeats and the speedup.  Compilation
happens during the untimed warmup pass, so the numba column measures
steady-state cost, which is what long sweeps see.

Usage: python benchmarks/compare_backends.py [--repeats N]
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from mshom import MicroConfig, registry, relax_solve, run_cell
from mshom import _accel, _kernels


def _bench_relax():
    case = registry()["enzyme"]
    cfg = MicroConfig(alpha=0.5, m_steps=200_000)
    relax_solve(case.system, case.x0, None, case.y0, case.epsilon, cfg)


def _bench_coupled_rk4():
    case = registry()["naive"]
    _kernels.rk4_coupled_final(
        case.system.f, case.system.g, case.x0, case.y0,
        case.epsilon, case.dt_coupled, 20_000,
    )


def _bench_hmm_cell_naive():
    # exact reference, so nothing but the two stages is timed; micro loops
    # are single-step here, which makes this run dispatch-bound
    run_cell(registry()["naive"], 2)


def _bench_hmm_cell_vdp():
    # coupled reference is computed in the warmup pass and cached
    run_cell(registry()["vdp"], 2)


WORKLOADS = [
    ("micro relax, 200k steps", _bench_relax),
    ("coupled rk4, 20k steps", _bench_coupled_rk4),
    ("full cell, naive k=2 (M=1)", _bench_hmm_cell_naive),
    ("full cell, vdp k=2 (M=20)", _bench_hmm_cell_vdp),
]


def _median_ms(fn, repeats: int) -> float:
    fn()  # warmup: jit compilation and cache fills stay out of the timings
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - t0) * 1e3)
    return statistics.median(samples)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="timed runs per workload per backend (default 5)")
    args = parser.parse_args()
    if args.repeats < 1:
        parser.error("--repeats must be >= 1")

    was_enabled = _accel.enabled()
    results: dict[str, dict[str, float]] = {name: {} for name, _ in WORKLOADS}
    backends = ["numpy"] + (["numba"] if _accel.HAS_NUMBA else [])
    try:
        for backend in backends:
            _accel.set_enabled(backend == "numba")
            for name, fn in WORKLOADS:
                results[name][backend] = _median_ms(fn, args.repeats)
    finally:
        _accel.set_enabled(was_enabled)

    width = max(len(name) for name, _ in WORKLOADS)
    header = f"{'workload':<{width}}  {'numpy (ms)':>12}  {'numba (ms)':>12}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, _ in WORKLOADS:
        numpy_ms = results[name]["numpy"]
        if "numba" in results[name]:
            numba_ms = results[name]["numba"]
            ratio = numpy_ms / numba_ms if numba_ms > 0 else np.inf
            print(f"{name:<{width}}  {numpy_ms:>12.3f}  {numba_ms:>12.3f}  {ratio:>7.1f}x")
        else:
            print(f"{name:<{width}}  {numpy_ms:>12.3f}  {'n/a':>12}  {'n/a':>8}")
    if not _accel.HAS_NUMBA:
        print("\nnumba is not importable; only the fallback was timed")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
