"""Command-line entry point: ``vs-sdimsim {run,converge,verify,coeffs}``.

Exit codes: 0 success, 1 verification failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

import numpy as np

from . import _backend
from .grids import pattern_grid, uniform_grid
from .harness import FORMATS, converge, emit_sweep, emit_tables, verify_sweep
from .integrator import global_error, integrate, truth_at
from .orderconds import max_residuals, method_error_constant
from .problems import PROBLEMS, get_problem
from .tableau import method

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
DEFAULT_STEPS = "1000,2000,4000,8000,16000"


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_format(sp: argparse.ArgumentParser, default: str) -> None:
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--format", choices=FORMATS, default=default)
    g.add_argument("--json", dest="format", action="store_const", const="json")
    g.add_argument("--table", dest="format", action="store_const", const="markdown")


def _add_problem(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--problem", choices=sorted(PROBLEMS), default="linear")
    sp.add_argument("--pde-grid", type=int, default=50, metavar="N",
                    help="interior points for bruss-pde (default 50)")
    sp.add_argument("--base", type=float, default=2.0, help="stepsize pattern base")
    sp.add_argument("--uniform", action="store_true", help="use equal steps instead of the pattern")
    sp.add_argument("--norm", choices=("2", "inf"), default="2")
    sp.add_argument("--backend", choices=_backend.BACKENDS, default="auto")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vs-sdimsim", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("run", help="integrate one problem on one grid")
    _add_problem(sp)
    sp.add_argument("--order", type=int, choices=(1, 2, 3, 4), default=2)
    sp.add_argument("--steps", type=int, default=1000)
    _add_format(sp, "markdown")

    sp = sub.add_parser("converge", help="global errors and observed orders over step counts")
    _add_problem(sp)
    sp.add_argument("--order", type=_int_list, default=[1, 2, 3, 4],
                    help="method orders, comma separated (default 1,2,3,4)")
    sp.add_argument("--steps", type=_int_list, default=_int_list(DEFAULT_STEPS),
                    help=f"ascending step counts (default {DEFAULT_STEPS})")
    _add_format(sp, "csv")

    sp = sub.add_parser("verify", help="order-condition residual sweep over random ratios")
    sp.add_argument("--orders", type=_int_list, default=[1, 2, 3, 4])
    sp.add_argument("--samples", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=42)
    _add_format(sp, "markdown")

    sp = sub.add_parser("coeffs", help="print a method's coefficients at given step ratios")
    sp.add_argument("--order", type=int, choices=(1, 2, 3, 4), default=2)
    sp.add_argument("--sigma", type=_float_list, default=None,
                    help="p-1 step ratios, comma separated (default all ones)")
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--json", dest="format", action="store_const", const="json")
    g.add_argument("--table", dest="format", action="store_const", const="markdown")
    sp.set_defaults(format="markdown")
    return ap


def _problem(args):
    kwargs = {"Ngrid": args.pde_grid} if args.problem == "bruss-pde" else {}
    if args.base <= 0:
        raise UsageError("--base must be positive")
    return get_problem(args.problem, **kwargs)


def cmd_run(args, out) -> int:
    prob = _problem(args)
    if args.steps < args.order:
        raise UsageError(f"--steps must be at least the order ({args.order})")
    grid = (uniform_grid(prob.x0, prob.X, args.steps) if args.uniform
            else pattern_grid(prob.x0, prob.X, args.steps, args.base))
    res = integrate(prob, grid, args.order, backend=args.backend)
    ge = global_error(res, truth_at(prob, prob.X), norm=args.norm)
    info = {"problem": prob.name, "order": args.order, "steps": args.steps,
            "x_N": res.state_final.x, "y_N": res.y_final.tolist(), "ge": ge,
            "n_f_evals": res.n_f_evals, "n_g_evals": res.n_g_evals, "backend": res.backend}
    if args.format == "json":
        out.write(json.dumps(info, indent=2) + "\n")
    else:
        vals = [f"{v:.12g}" for v in res.y_final]
        if len(vals) > 8:
            vals = vals[:3] + ["..."] + vals[-3:]
        y = "[" + ", ".join(vals) + "]"
        for key, val in (("problem", prob.name), ("order", args.order), ("steps", args.steps),
                         ("x_N", f"{res.state_final.x:.17g}"), ("y_N", y), ("ge", f"{ge:.6e}"),
                         ("f evals", res.n_f_evals), ("g evals", res.n_g_evals),
                         ("backend", res.backend)):
            out.write(f"{key:8s} {val}\n")
    return EXIT_OK


def cmd_converge(args, out) -> int:
    prob = _problem(args)
    bad = [p for p in args.order if p not in (1, 2, 3, 4)]
    if bad:
        raise UsageError(f"orders must be in 1..4, got {bad}")
    if not args.steps or any(b <= a for a, b in zip(args.steps, args.steps[1:])):
        raise UsageError("--steps must be strictly ascending")
    if min(args.steps) < max(args.order):
        raise UsageError("every step count must be at least the largest order")
    tables = {p: converge(prob, p, args.base, args.steps, norm=args.norm,
                          uniform=args.uniform, backend=args.backend) for p in args.order}
    out.write(emit_tables(tables, args.format))
    return EXIT_OK


def cmd_verify(args, out) -> int:
    if args.samples < 1:
        raise UsageError("--samples must be positive")
    if any(p not in (1, 2, 3, 4) for p in args.orders):
        raise UsageError("orders must be in 1..4")
    report = verify_sweep(args.orders, args.samples, args.seed)
    out.write(emit_sweep(report, args.format))
    for msg in report.failures:
        print(msg, file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_coeffs(args, out) -> int:
    sigma = args.sigma if args.sigma is not None else [1.0] * (args.order - 1)
    if len(sigma) != args.order - 1:
        raise UsageError(f"order {args.order} takes {args.order - 1} ratios, got {len(sigma)}")
    if any(not s > 0 for s in sigma):
        raise UsageError("step ratios must be positive")
    t = method(args.order, sigma)
    if args.format == "json":
        out.write(t.to_json(indent=2) + "\n")
        return EXIT_OK
    rs, ro = max_residuals(t)
    out.write(f"order {t.p}, sigma = {[float(x) for x in t.sigma.values]}\n")
    with np.printoptions(precision=15, suppress=False, linewidth=120):
        for name in ("c", "A", "Abar", "U", "B", "Bbar", "V"):
            out.write(f"\n{name} =\n{np.asarray(getattr(t, name))}\n")
    out.write(f"\nmax stage residual  {rs:.3e}\nmax output residual {ro:.3e}\n")
    out.write(f"v^T phi             {method_error_constant(t):.6e}\n")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "converge": cmd_converge, "verify": cmd_verify, "coeffs": cmd_coeffs}


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out if out is not None else sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return COMMANDS[args.command](args, out)
    except (UsageError, ValueError) as exc:
        print(f"vs-sdimsim {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
