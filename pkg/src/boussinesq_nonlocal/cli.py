"""Command-line entry point: ``boussinesq-nonlocal <command> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import diagnostics as dg
from .errors import BoussinesqError, InadmissibleProblemError
from .grid import make_grid
from .io import (
    load_kernels,
    load_problem,
    load_symbols,
    write_csv,
    write_linear_outputs,
    write_nonlinear_outputs,
)
from .linear import LinearProblem, solve_linear
from .nonlinear import solve_nonlinear
from .nonlocal_conditions import NonlocalKernel, admissibility_margin
from .symbols import check_symbol_bounds, preset_symbol

SUITES = ("uniform-estimate", "sobolev-estimate", "nirenberg", "manufactured", "identities")
# short names accepted by the verify command
SUITE_ALIASES = {"thm21": "uniform-estimate", "thm22": "sobolev-estimate"}


def _print_kv(d: dict):
    for k, v in d.items():
        print(f"{k}={v}")


def cmd_check_symbols(args) -> int:
    L0, L1, L2 = load_symbols(args.symbols)
    grid = make_grid(L0.n, args.points, args.half_width)
    rep = check_symbol_bounds(L0, L1, L2, args.s, args.p, grid)
    verdict = "admissible" if rep.admissible else "NOT admissible"
    print(f"symbols: {verdict} on {grid.points} grid, s={args.s}, p={args.p}")
    print(f"  M1 estimate {rep.M1_est:.6g}, M2 estimate {rep.M2_est:.6g}, worst xi {rep.worst_xi.tolist()}")
    for kind, xi in rep.zero_hits:
        print(f"  {kind} vanishes at xi={xi.tolist()}")
    d = rep.as_dict()
    d.pop("zero_hits")
    d["zero_hits"] = len(rep.zero_hits)
    _print_kv(d)
    return 0 if rep.admissible else 1


def cmd_check_kernels(args) -> int:
    alpha, beta = load_kernels(args.kernels)
    margin = admissibility_margin(alpha, beta)
    ok = margin > 0
    print(f"kernels: {'admissible' if ok else 'NOT admissible'} (margin {margin:.6g})")
    _print_kv({"admissible": ok, "margin": margin,
               "tv_alpha": alpha.total_variation(), "tv_beta": beta.total_variation()})
    return 0 if ok else 1


def _report_rejection(exc: InadmissibleProblemError) -> int:
    print(f"rejected: {exc}", file=sys.stderr)
    witness = exc.witness
    if isinstance(witness, np.ndarray):
        witness = witness.tolist()
    _print_kv({"rejected": True, "hypothesis": exc.hypothesis, "witness": witness})
    return 2


def cmd_solve_linear(args) -> int:
    spec = load_problem(args.problem)
    if args.force:
        spec.force = True
    try:
        sol = solve_linear(spec.linear())
    except InadmissibleProblemError as exc:
        return _report_rejection(exc)
    write_linear_outputs(args.out, sol, spec.s, spec.p)
    d = sol.diagnostics
    print(f"solved {len(sol.times)} output times; min|D| = {d['min_det']:.6g}, "
          f"residuals {d['residual_u']:.3e} / {d['residual_ut']:.3e}")
    return 0


def cmd_solve(args) -> int:
    spec = load_problem(args.problem)
    if args.force:
        spec.force = True
    controls = spec.nonlinear_controls()
    for key in ("tol_fp", "n_t", "C0", "C1", "blowup_ceiling", "window", "max_windows"):
        val = getattr(args, key)
        if val is not None:
            setattr(controls, key, val)
    try:
        run = solve_nonlinear(spec.nonlinear(), args.horizon, controls)
    except InadmissibleProblemError as exc:
        return _report_rejection(exc)
    write_nonlinear_outputs(args.out, run, spec.times, spec.s, spec.p)
    print(f"{run.termination}: {run.windows_completed} windows, t_final={run.times[-1]:.6g}"
          + (f", threshold crossed at t={run.blowup_time:.6g}" if run.blowup_time is not None else ""))
    return 0


def _estimate_suite(kind, args, out: Path):
    fn = dg.verify_uniform_estimate if kind == "uniform-estimate" else dg.verify_sobolev_estimate
    rep = fn(args.trials, seed=args.seed)
    write_csv(out / f"{kind}.csv", ("trial", "lhs", "rhs", "ratio"),
              [(i, a, b, r) for i, (a, b, r) in enumerate(zip(rep.lhs, rep.rhs, rep.ratios))])
    ok = bool(rep.stable)
    return [(f"{kind}_max_ratio", rep.max_ratio, rep.refined_max_ratio, ok)]


def _nirenberg_suite(args, out: Path):
    rng = np.random.default_rng(args.seed)
    grid = make_grid(1, 128, 8.0)
    rows, all_ok = [], True
    for i in range(args.trials):
        c, w = rng.uniform(-2, 2), rng.uniform(0.7, 1.8)
        u = grid.sample(lambda x: np.exp(-((x - c) ** 2) / (2 * w * w)))
        lhs, rhs, ok = dg.nirenberg_check(u, 1, 2, 2.0, 2.0, 2.0, 0.5)
        rows.append((i, lhs, rhs, ok))
        all_ok &= ok
    write_csv(out / "nirenberg.csv", ("trial", "lhs", "rhs", "ok"), rows)
    return [("nirenberg", max(r[1] / r[2] for r in rows) if rows else 0.0, None, all_ok)]


def _manufactured_suite(args, out: Path):
    grid = make_grid(1, 32, np.pi)
    L0, L1, L2 = preset_symbol("classical_boussinesq_1")
    T = 1.0
    base = LinearProblem(L0, L1, L2, NonlocalKernel.zero(T), NonlocalKernel.zero(T),
                         grid.zeros(), grid.zeros(), times=tuple(np.linspace(0, T, 5)))
    k = 2
    w = np.sqrt(k * k / (1 + k * k))
    mode = dg.manufactured_residual(
        base, lambda t, x: np.cos(k * x) * np.cos(w * t), lambda t, x: -w * np.cos(k * x) * np.sin(w * t),
        lambda t, x: -w * w * np.cos(k * x) * np.cos(w * t), nodes_sequence=())
    poly = dg.manufactured_residual(
        base, lambda t, x: (t + t**3) * np.cos(k * x), lambda t, x: (1 + 3 * t * t) * np.cos(k * x),
        lambda t, x: 6 * t * np.cos(k * x))
    write_csv(out / "manufactured.csv", ("nodes", "error"), sorted(poly.errors_by_nodes.items()))
    order = float(np.min(poly.observed_orders)) if poly.observed_orders.size else 0.0
    return [("manufactured_mode_error", mode.error, 1e-9, mode.error <= 1e-9),
            ("manufactured_duhamel_order", order, 3.5, order >= 3.5)]


def cmd_verify(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    suite = SUITE_ALIASES.get(args.suite, args.suite)
    if suite in ("uniform-estimate", "sobolev-estimate"):
        results = _estimate_suite(suite, args, out)
    elif suite == "nirenberg":
        results = _nirenberg_suite(args, out)
    elif suite == "manufactured":
        results = _manufactured_suite(args, out)
    else:
        checks = dg.identities_suite(args.seed, args.trials)
        results = [(c.name, c.value, c.tolerance, c.passed) for c in checks]
        write_csv(out / "identities.csv", ("check", "value", "tolerance", "passed"), results)
    write_csv(out / "summary.csv", ("check", "value", "reference", "passed"), results)
    for name, value, ref, ok in results:
        extra = "" if ref is None else f" (reference {ref:.3g})"
        print(f"{'PASS' if ok else 'FAIL'} {name}: {value:.6g}{extra}")
    return 0 if all(r[3] for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="boussinesq-nonlocal", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-symbols", help="scan symbols for admissibility on a grid")
    p.add_argument("--symbols", required=True)
    p.add_argument("--s", type=float, default=2.0)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--points", type=int, default=64)
    p.add_argument("--half-width", type=float, default=np.pi)
    p.set_defaults(func=cmd_check_symbols)

    p = sub.add_parser("check-kernels", help="print the kernel margin and admissibility")
    p.add_argument("--kernels", required=True)
    p.set_defaults(func=cmd_check_kernels)

    p = sub.add_parser("solve-linear", help="solve the linear problem")
    p.add_argument("--problem", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true", help="override the kernel inequality")
    p.set_defaults(func=cmd_solve_linear)

    p = sub.add_parser("solve", help="solve the nonlinear problem")
    p.add_argument("--problem", required=True)
    p.add_argument("--horizon", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.add_argument("--tol-fp", dest="tol_fp", type=float)
    p.add_argument("--n-t", dest="n_t", type=int)
    p.add_argument("--C0", type=float)
    p.add_argument("--C1", type=float)
    p.add_argument("--blowup-ceiling", dest="blowup_ceiling", type=float)
    p.add_argument("--window", type=float)
    p.add_argument("--max-windows", dest="max_windows", type=int)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="run a diagnostic suite")
    p.add_argument("--suite", choices=SUITES + tuple(SUITE_ALIASES), required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="verify-out")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (BoussinesqError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
