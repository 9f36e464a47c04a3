"""Command-line front end.

Subcommands:

- ``run``: one problem, one or more orders (``--k 0,1,2`` or ``coupled``),
  one CSV row per order.
- ``sweep``: vary exactly one of --eps/--dt/--tau over a grid
  (``lo:hi:logN``, ``lo:hi:linN``, or a comma list) for each order.
- ``riccati``: closure iterates vs fixed point for a linear problem.
- ``list-problems``: show the bundled problems and their defaults.

Precedence for numeric settings: explicit flags beat the ``--config``
key=value file, which beats the problem's bundled defaults.  The fully
resolved settings are echoed as key=value lines before rows are computed
(to stderr when the CSV itself streams to stdout).
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys

import numpy as np

from . import _accel
from .bench import (
    BenchmarkCase,
    CellResult,
    convergence_sweep,
    registry,
    run_cell,
)
from .errors import MshomError
from .riccati import LinearTwoScale, riccati_fixed_point, riccati_iterates

CSV_HEADER = ["problem", "k", "alg", "diff", "eps", "dt", "tau", "M", "alpha",
              "Tc", "error", "micro_calls", "wall_ms", "status"]
RICCATI_HEADER = ["eps", "k", "normC_err", "d_err", "residual"]

# flag name -> (override key, parser)
_ALG_NAMES = {"1": "type1", "2": "type2", "type1": "type1", "type2": "type2"}


def _parse_alg(text: str) -> str:
    alg = _ALG_NAMES.get(text.strip().lower())
    if alg is None:
        raise ValueError(f"unknown algorithm {text!r}, expected 1, 2, type1, or type2")
    return alg


def _parse_diff(text: str) -> str:
    t = text.strip().lower()
    if t not in ("forward", "central"):
        raise ValueError(f"unknown difference scheme {text!r}, expected forward or central")
    return t


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"cannot parse boolean from {text!r}")


_OVERRIDE_SPECS = {
    "eps": ("epsilon", float),
    "T": ("t_final", float),
    "dt": ("dt_macro", float),
    "dtc": ("dt_coupled", float),
    "tau": ("tau", float),
    "M": ("m_steps", int),
    "alpha": ("alpha", float),
    "np": ("n_p", int),
    "criterion_k": ("criterion_order", int),
    "alg": ("algorithm", _parse_alg),
    "diff": ("diff_scheme", _parse_diff),
    "warm_start": ("warm_start", _parse_bool),
}

_CONFIG_ONLY_KEYS = {"problem", "k", "jobs", "seed", "out"}


class UsageError(Exception):
    pass


def _parse_grid(text: str) -> list[float]:
    """lo:hi:logN / lo:hi:linN / comma list / single value."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"bad grid {text!r}, expected lo:hi:logN or lo:hi:linN")
        lo, hi, spec = parts
        lo = float(lo)
        hi = float(hi)
        if spec[:3] not in ("log", "lin") or not spec[3:].isdigit():
            raise UsageError(f"bad grid spec {spec!r}, expected logN or linN")
        n = int(spec[3:])
        if n < 1:
            raise UsageError("grid must contain at least one point")
        if spec.startswith("log"):
            if lo <= 0.0 or hi <= 0.0:
                raise UsageError("log grids need positive endpoints")
            return list(np.logspace(math.log10(lo), math.log10(hi), n))
        return list(np.linspace(lo, hi, n))
    if "," in text:
        return [float(v) for v in text.split(",") if v.strip()]
    return [float(text)]


def _parse_k_list(text: str) -> list[int | str]:
    out: list[int | str] = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        if tok == "coupled":
            out.append("coupled")
        else:
            try:
                k = int(tok)
            except ValueError:
                raise UsageError(f"bad order {tok!r}, expected an integer or 'coupled'") from None
            if k < 0:
                raise UsageError(f"orders must be >= 0, got {k}")
            out.append(k)
    if not out:
        raise UsageError("empty order list")
    return out


def _read_config_file(path: str) -> dict[str, str]:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    out: dict[str, str] = {}
    for ln, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{ln}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _OVERRIDE_SPECS and key not in _CONFIG_ONLY_KEYS:
            raise UsageError(f"{path}:{ln}: unknown config key {key!r}")
        out[key] = value
    return out


def _resolve_overrides(args, config_values: dict[str, str], skip: tuple = ()) -> dict:
    """Flags beat config file entries; values are parsed per key.

    skip names flags some caller consumed already (sweep grids carry
    grid syntax that must not reach the scalar parsers).
    """
    overrides: dict = {}
    for flag, (key, parse) in _OVERRIDE_SPECS.items():
        if flag in skip:
            continue
        raw = getattr(args, flag, None)
        if raw is None and flag in config_values:
            raw = config_values[flag]
        if raw is None:
            continue
        try:
            overrides[key] = parse(raw) if isinstance(raw, str) else raw
        except ValueError as exc:
            raise UsageError(f"bad value for {flag}: {exc}") from exc
    if getattr(args, "no_warm_start", False):
        overrides["warm_start"] = False
    return overrides


def _get_case(name: str) -> BenchmarkCase:
    cases = registry()
    if name not in cases:
        raise UsageError(f"unknown problem {name!r}, expected one of {sorted(cases)}")
    return cases[name]


def _echo_resolved(pairs: list[tuple[str, object]], to_stderr: bool) -> None:
    stream = sys.stderr if to_stderr else sys.stdout
    for key, value in pairs:
        print(f"{key}={value}", file=stream)
    stream.flush()


def _open_out(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    try:
        return open(path, "w", newline="", encoding="utf-8"), True
    except OSError as exc:
        raise UsageError(f"cannot write to {path}: {exc}") from exc


def _row_values(row: CellResult) -> list:
    return [row.problem, row.k, row.alg, row.diff, row.eps, row.dt, row.tau,
            row.m_steps, row.alpha, row.t_c, row.error, row.micro_calls,
            row.wall_ms, row.status]


def _write_rows(out_path, header, rows) -> None:
    fh, close = _open_out(out_path)
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    finally:
        if close:
            fh.close()


def _resolved_pairs(case, overrides, extra) -> list[tuple[str, object]]:
    config = case.default_config(**{k: v for k, v in overrides.items() if k != "k"})
    pairs = [
        ("problem", case.name),
        ("epsilon", config.epsilon),
        ("t_final", config.t_final),
        ("dt_coupled", config.dt_coupled),
        ("dt_macro", config.dt_macro),
        ("tau", config.manifold.tau),
        ("M", config.manifold.micro.m_steps),
        ("alpha", config.manifold.micro.alpha),
        ("algorithm", config.manifold.algorithm),
        ("diff_scheme", config.manifold.diff_scheme),
        ("n_p", config.n_p),
        ("criterion_order", config.criterion_order),
        ("warm_start", config.warm_start),
        ("backend", "numba" if _accel.enabled() else "numpy"),
    ]
    pairs.extend(extra)
    return pairs


def _jobs(args, config_values) -> int:
    raw = getattr(args, "jobs", None)
    if raw is None:
        raw = config_values.get("jobs")
    if raw is None:
        raw = os.environ.get("MSHOM_JOBS")
    if raw is None:
        return 1
    try:
        jobs = int(raw)
    except ValueError:
        raise UsageError(f"bad jobs value {raw!r}") from None
    if jobs < 1:
        raise UsageError(f"jobs must be >= 1, got {jobs}")
    return jobs


# -- subcommands --------------------------------------------------------------

def _cmd_run(args) -> int:
    config_values = _read_config_file(args.config) if args.config else {}
    problem = args.problem or config_values.get("problem")
    if problem is None:
        raise UsageError("run needs --problem")
    case = _get_case(problem)
    overrides = _resolve_overrides(args, config_values)
    k_list = _parse_k_list(args.k if args.k is not None else config_values.get("k", "0"))
    _echo_resolved(
        _resolved_pairs(case, overrides, [("k", ",".join(map(str, k_list)))]),
        to_stderr=args.out in (None, "-"),
    )
    rows = [run_cell(case, k, **overrides) for k in k_list]
    _write_rows(args.out, CSV_HEADER, [_row_values(r) for r in rows])
    return 0


def _cmd_sweep(args) -> int:
    config_values = _read_config_file(args.config) if args.config else {}
    problem = args.problem or config_values.get("problem")
    if problem is None:
        raise UsageError("sweep needs --problem")
    case = _get_case(problem)

    grids: dict[str, list[float]] = {}
    scalars: dict[str, float] = {}
    for flag, axis in (("eps", "epsilon"), ("dt", "dt_macro"), ("tau", "tau")):
        raw = getattr(args, flag, None)
        if raw is None and flag in config_values:
            raw = config_values[flag]
        if raw is None:
            continue
        values = _parse_grid(raw)
        if len(values) > 1:
            grids[axis] = values
        else:
            scalars[axis] = values[0]
    if len(grids) != 1:
        raise UsageError(
            f"sweep needs exactly one grid axis among --eps/--dt/--tau, found {len(grids)}"
        )
    axis, grid = next(iter(grids.items()))

    overrides = _resolve_overrides(args, config_values, skip=("eps", "dt", "tau"))
    overrides.update(scalars)
    k_list = _parse_k_list(args.k if args.k is not None else config_values.get("k", "0"))
    jobs = _jobs(args, config_values)

    _echo_resolved(
        _resolved_pairs(case, overrides, [
            ("k", ",".join(map(str, k_list))),
            ("sweep_axis", axis),
            ("grid", ",".join(f"{float(v):g}" for v in grid)),
            ("jobs", jobs),
        ]),
        to_stderr=args.out in (None, "-"),
    )
    report = convergence_sweep(case, k_list, axis, grid, overrides, jobs=jobs)
    _write_rows(args.out, CSV_HEADER, [_row_values(r) for r in report.rows])
    for k, fit in report.fits.items():
        print(f"fit k={k}: slope={fit.slope:.4f} r2={fit.r2:.6f} n={fit.n_points}",
              file=sys.stderr if args.out in (None, "-") else sys.stdout)
    return 0


def _naive_linear() -> LinearTwoScale:
    return LinearTwoScale(
        A11=np.array([[0.0]]), A12=np.array([[1.0]]),
        A21=np.array([[1.0]]), A22=np.array([[-1.0]]),
        b1=np.array([0.0]), b2=np.array([0.0]),
    )


def _random_linear(seed: int, n_x: int, n_y: int) -> LinearTwoScale:
    rng = np.random.default_rng(seed)
    r = rng.standard_normal((n_y, n_y))
    return LinearTwoScale(
        A11=0.5 * rng.standard_normal((n_x, n_x)),
        A12=0.5 * rng.standard_normal((n_x, n_y)),
        A21=0.5 * rng.standard_normal((n_y, n_x)),
        A22=-(r @ r.T + 0.5 * np.eye(n_y)),
        b1=rng.standard_normal(n_x),
        b2=rng.standard_normal(n_y),
    )


def _cmd_riccati(args) -> int:
    if args.problem == "naive":
        linsys = _naive_linear()
    elif args.problem == "random":
        linsys = _random_linear(args.seed, args.nx, args.ny)
    else:
        raise UsageError(f"unknown linear problem {args.problem!r}, expected naive or random")
    eps_grid = _parse_grid(args.eps)
    k_list = [k for k in _parse_k_list(args.k) if k != "coupled"]
    if not k_list:
        raise UsageError("riccati needs integer orders")
    _echo_resolved(
        [("problem", args.problem), ("eps", ",".join(repr(v) for v in eps_grid)),
         ("k", ",".join(map(str, k_list))), ("tol", args.tol), ("seed", args.seed)],
        to_stderr=args.out in (None, "-"),
    )
    rows = []
    for eps in eps_grid:
        sol = riccati_fixed_point(linsys, eps, tol=args.tol)
        for k in k_list:
            c_k, d_k = riccati_iterates(linsys, eps, k)
            rows.append([
                eps, k,
                float(np.linalg.norm(c_k - sol.C_star, 2)),
                float(np.linalg.norm(d_k - sol.d_star, 2)),
                sol.residual_C,
            ])
    _write_rows(args.out, RICCATI_HEADER, rows)
    return 0


def _cmd_list_problems(args) -> int:
    cases = registry()
    header = f"{'name':<12}{'nx':>3}{'ny':>3}{'T':>6}{'eps':>9}{'dt_c':>9}{'dt':>8}" \
             f"{'alg':>7}{'diff':>9}{'tau':>9}{'M':>5}{'alpha':>7}{'beta':>6}"
    print(header)
    for case in cases.values():
        print(f"{case.name:<12}{case.system.n_x:>3}{case.system.n_y:>3}"
              f"{case.t_final:>6g}{case.epsilon:>9g}{case.dt_coupled:>9g}"
              f"{case.dt_macro:>8g}{case.algorithm:>7}{case.diff_scheme:>9}"
              f"{case.tau:>9g}{case.m_steps:>5}{case.alpha:>7g}"
              f"{case.system.beta_hat:>6g}")
    return 0


def _add_common(parser: argparse.ArgumentParser, sweep: bool) -> None:
    parser.add_argument("--problem", help="bundled problem name")
    parser.add_argument("--k", help="comma list of orders, 'coupled' allowed")
    grid_note = " (grid lo:hi:logN, lo:hi:linN, or comma list)" if sweep else ""
    parser.add_argument("--eps", help="scale separation epsilon" + grid_note)
    parser.add_argument("--dt", help="macro step" + grid_note)
    parser.add_argument("--tau", help="differencing step" + grid_note)
    parser.add_argument("--T", help="final time")
    parser.add_argument("--dtc", help="coupled-stage step")
    parser.add_argument("--M", help="micro iteration count")
    parser.add_argument("--alpha", help="micro damping factor")
    parser.add_argument("--np", help="criterion check interval in coupled steps")
    parser.add_argument("--criterion-k", dest="criterion_k", help="closure order for the criterion")
    parser.add_argument("--alg", help="closure variant: 1, 2, type1, type2")
    parser.add_argument("--diff", help="difference scheme: forward, central")
    parser.add_argument("--no-warm-start", dest="no_warm_start", action="store_true",
                        help="seed micro solves per policy instead of previous values")
    parser.add_argument("--config", help="key=value settings file (flags win)")
    parser.add_argument("--out", help="CSV output path, '-' or omitted for stdout")
    if sweep:
        parser.add_argument("--jobs", help="parallel cells bound (or MSHOM_JOBS)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mshom",
        description="Two-stage solver for stiff two-scale ODE systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="one problem, one row per order")
    _add_common(p_run, sweep=False)
    p_run.set_defaults(fn=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="vary one axis over a grid")
    _add_common(p_sweep, sweep=True)
    p_sweep.set_defaults(fn=_cmd_sweep)

    p_ric = sub.add_parser("riccati", help="linear closure iterates vs fixed point")
    p_ric.add_argument("--problem", default="naive", help="naive or random")
    p_ric.add_argument("--eps", default="1e-4:1e-2:log6", help="epsilon grid")
    p_ric.add_argument("--k", default="0,1,2,3", help="orders")
    p_ric.add_argument("--nx", type=int, default=2)
    p_ric.add_argument("--ny", type=int, default=2)
    p_ric.add_argument("--seed", type=int, default=0)
    p_ric.add_argument("--tol", type=float, default=1e-13)
    p_ric.add_argument("--out", help="CSV output path")
    p_ric.set_defaults(fn=_cmd_riccati)

    p_list = sub.add_parser("list-problems", help="show bundled problems")
    p_list.set_defaults(fn=_cmd_list_problems)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MshomError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
