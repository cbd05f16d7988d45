"""Convergence tables, order estimates, verification sweeps and table output."""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import ConvergenceRow, OdeSystem
from .grids import pattern_grid, uniform_grid
from .integrator import global_error, integrate, truth_at
from .orderconds import TIER_TOL, max_residuals, method_error_constant
from .tableau import FIXED, method, order2, order3_closed, solve_coefficients

THREADS_ENV = "VS_SDIMSIM_THREADS"
FORMATS = ("csv", "markdown", "json")
#: solver vs closed-form agreement required by the sweep (relative)
CLOSED_FORM_TOL = 1e-10


def observed_order(ge1: float, ge2: float, N1: int, N2: int) -> float:
    """``log(ge1 / ge2) / log(N2 / N1)``."""
    if min(ge1, ge2, N1, N2) <= 0:
        raise ValueError("observed order needs positive errors and step counts")
    if N1 == N2:
        raise ValueError("step counts must differ")
    return math.log(ge1 / ge2) / math.log(N2 / N1)


def thread_count(default: Optional[int] = None) -> int:
    """Worker threads from ``VS_SDIMSIM_THREADS``; 0 means run sequentially."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return default if default is not None else min(8, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a nonnegative integer, got {raw!r}") from None
    if n < 0:
        raise ValueError(f"{THREADS_ENV} must be a nonnegative integer, got {n}")
    return n


def _map(fn, items: Sequence, threads: int) -> list:
    # results come back in input order whatever the completion order
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))


def attach_orders(pairs: Iterable[tuple[int, float]]) -> list[ConvergenceRow]:
    rows: list[ConvergenceRow] = []
    prev = None
    for N, ge in pairs:
        est = None
        if prev is not None and prev[1] > 0 and ge > 0:
            est = observed_order(prev[1], ge, prev[0], N)
        rows.append(ConvergenceRow(int(N), float(ge), est))
        prev = (N, ge)
    return rows


def converge(problem: OdeSystem, p: int, base: float, N_list: Sequence[int],
             norm: str = "2", uniform: bool = False, backend: str = "auto",
             threads: Optional[int] = None) -> list[ConvergenceRow]:
    """Global error at ``problem.X`` for each step count, with observed orders.

    Cells run concurrently on up to ``threads`` workers (default from
    ``VS_SDIMSIM_THREADS``); the rows are identical either way.
    """
    N_list = [int(N) for N in N_list]
    if not N_list:
        raise ValueError("need at least one step count")
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("step counts must be strictly ascending")
    truth = truth_at(problem, problem.X)
    # starting values shared by every cell when no exact solution is known
    ref = None if problem.exact is not None else (lambda x: truth_at(problem, x))

    def cell(N: int) -> float:
        if uniform:
            grid = uniform_grid(problem.x0, problem.X, N)
        else:
            grid = pattern_grid(problem.x0, problem.X, N, base)
        res = integrate(problem, grid, p, backend=backend, ref=ref)
        return global_error(res, truth, norm=norm)

    n_threads = thread_count() if threads is None else threads
    errors = _map(cell, N_list, n_threads)
    return attach_orders(zip(N_list, errors))


# -- verification sweep ------------------------------------------------------------

@dataclass
class SweepRow:
    method: int
    sigma: tuple
    max_stage_residual: float
    max_output_residual: float
    closed_form_deviation: Optional[float]
    phi: float


@dataclass
class VerifyReport:
    rows: list = field(default_factory=list)
    error_constants: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    def summary(self) -> dict:
        out = {}
        for p in sorted({r.method for r in self.rows}):
            mine = [r for r in self.rows if r.method == p]
            dev = [r.closed_form_deviation for r in mine if r.closed_form_deviation is not None]
            out[p] = {
                "samples": len(mine),
                "max_stage_residual": max(r.max_stage_residual for r in mine),
                "max_output_residual": max(r.max_output_residual for r in mine),
                "max_closed_form_deviation": max(dev) if dev else None,
                "tolerance": TIER_TOL[p],
                "error_constant": self.error_constants.get(p),
            }
        return out


def _rel_dev(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float((np.abs(a - b) / np.maximum(1.0, np.abs(b))).max())


def closed_form_deviation(p: int, sigma) -> Optional[float]:
    """Largest relative gap between solver-built and closed-form coefficients (p = 2, 3)."""
    if p == 2:
        t, ref = solve_coefficients(FIXED[2], sigma), order2(sigma)
        return max(_rel_dev(getattr(t, k), getattr(ref, k)) for k in ("A", "U", "B", "Bbar"))
    if p == 3:
        t, ref = solve_coefficients(FIXED[3], sigma), order3_closed(sigma)
        return max(_rel_dev(getattr(t, k), ref[k]) for k in ("A", "U", "B"))
    return None


def verify_sweep(orders: Iterable[int] = (1, 2, 3, 4), samples: int = 1000, seed: int = 42,
                 low: float = 0.5, high: float = 2.0) -> VerifyReport:
    """Order-condition residuals over seeded random ratios in ``[low, high]``."""
    rng = np.random.default_rng(seed)
    report = VerifyReport()
    for p in orders:
        if p not in FIXED:
            raise ValueError(f"no method of order {p}")
        tol = TIER_TOL[p]
        draws = rng.uniform(low, high, size=(samples if p > 1 else 1, p - 1))
        for sig in draws:
            t = method(p, sig)
            rs, ro = max_residuals(t)
            dev = closed_form_deviation(p, sig)
            report.rows.append(SweepRow(p, tuple(float(x) for x in sig), rs, ro, dev,
                                        method_error_constant(t)))
            if rs > tol or ro > tol:
                report.failures.append(f"order {p}: residual {max(rs, ro):.3e} > {tol:.0e} at {sig}")
            if dev is not None and dev > CLOSED_FORM_TOL:
                report.failures.append(f"order {p}: closed-form gap {dev:.3e} at {sig}")
        report.error_constants[p] = method_error_constant(method(p))
    return report


# -- output ------------------------------------------------------------------------

def _sci(x: float, digits: int) -> str:
    """Scientific notation without exponent padding: ``3.530000e-4``."""
    mant, exp = f"{x:.{digits}e}".split("e")
    return f"{mant}e{int(exp)}"


def emit_table(rows: Sequence[ConvergenceRow], fmt: str = "csv") -> str:
    """Render one convergence table as csv, markdown or json."""
    if fmt == "csv":
        lines = ["N,ge,O_N"]
        for r in rows:
            o = "" if r.order_estimate is None else f"{r.order_estimate:.6g}"
            lines.append(f"{r.N},{_sci(r.ge, 6)},{o}")
        return "\n".join(lines) + "\n"
    if fmt == "markdown":
        lines = ["| N | ge | O_N |", "|---:|---:|---:|"]
        for r in rows:
            o = "" if r.order_estimate is None else f"{r.order_estimate:.2f}"
            lines.append(f"| {r.N} | {_sci(r.ge, 2)} | {o} |")
        return "\n".join(lines) + "\n"
    if fmt == "json":
        return json.dumps([r.to_dict() for r in rows], indent=2) + "\n"
    raise ValueError(f"unknown format {fmt!r}; choose from {FORMATS}")


def emit_tables(tables: dict, fmt: str = "csv") -> str:
    """Render several tables keyed by method order.

    Markdown puts step counts across and a ge / O_N row pair per method.
    """
    if len(tables) == 1 and fmt != "markdown":
        return emit_table(next(iter(tables.values())), fmt)
    if fmt == "csv":
        lines = ["p,N,ge,O_N"]
        for p, rows in tables.items():
            lines += [f"{p},{ln}" for ln in emit_table(rows, "csv").splitlines()[1:]]
        return "\n".join(lines) + "\n"
    if fmt == "json":
        return json.dumps({str(p): [r.to_dict() for r in rows] for p, rows in tables.items()},
                          indent=2) + "\n"
    if fmt == "markdown":
        Ns = sorted({r.N for rows in tables.values() for r in rows})
        head = "| method | | " + " | ".join(str(N) for N in Ns) + " |"
        lines = [head, "|---|---|" + "---:|" * len(Ns)]
        for p, rows in tables.items():
            by_N = {r.N: r for r in rows}
            ge = [_sci(by_N[N].ge, 2) if N in by_N else "" for N in Ns]
            on = [f"{by_N[N].order_estimate:.2f}" if N in by_N and by_N[N].order_estimate
                  is not None else "" for N in Ns]
            lines.append(f"| p={p} | ge | " + " | ".join(ge) + " |")
            lines.append("| | O_N | " + " | ".join(on) + " |")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}; choose from {FORMATS}")


def emit_sweep(report: VerifyReport, fmt: str = "csv") -> str:
    if fmt == "json":
        return json.dumps({"ok": report.ok, "summary": {str(k): v for k, v in report.summary().items()},
                           "failures": report.failures}, indent=2) + "\n"
    if fmt == "csv":
        lines = ["method,sigma,max_stage_residual,max_output_residual,closed_form_deviation,phi"]
        for r in report.rows:
            sig = ";".join(f"{x:.17g}" for x in r.sigma)
            dev = "" if r.closed_form_deviation is None else _sci(r.closed_form_deviation, 3)
            lines.append(f"{r.method},{sig},{_sci(r.max_stage_residual, 3)},"
                         f"{_sci(r.max_output_residual, 3)},{dev},{_sci(r.phi, 6)}")
        return "\n".join(lines) + "\n"
    if fmt == "markdown":
        lines = ["| p | samples | max stage res | max output res | closed-form gap | tol | v^T phi |",
                 "|---:|---:|---:|---:|---:|---:|---:|"]
        for p, s in report.summary().items():
            dev = "" if s["max_closed_form_deviation"] is None else _sci(s["max_closed_form_deviation"], 2)
            lines.append(f"| {p} | {s['samples']} | {_sci(s['max_stage_residual'], 2)} | "
                         f"{_sci(s['max_output_residual'], 2)} | {dev} | {s['tolerance']:.0e} | "
                         f"{_sci(s['error_constant'], 4)} |")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}; choose from {FORMATS}")
