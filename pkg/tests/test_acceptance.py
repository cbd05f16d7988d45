"""Acceptance criteria 1-11.

Each test records one ``criterion k: PASS|FAIL`` line; the lines are printed
in the terminal summary (see conftest.py) and when run as a script. Reference
tables are fixed reference values; nothing here is tuned to our own output.
"""
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from vssdimsim.core import OdeSystem, SolutionState
from vssdimsim.grids import pattern_grid
from vssdimsim.harness import attach_orders, closed_form_deviation, converge, verify_sweep
from vssdimsim.integrator import global_error, integrate, step, truth_at
from vssdimsim.orderconds import (TIER_TOL, fixed_stepsize_check, method_error_constant,
                                  propagation_matrix, zero_stability_product)
from vssdimsim.problems import get_problem
from vssdimsim.tableau import method, order2

RESULTS: dict = {}
NS = [1000, 2000, 4000, 8000, 16000]
NS_PDE = [12000, 13000, 14000, 15000, 16000]

# reference (ge per N, O_N per consecutive pair) keyed by (problem, base) then order
TABLES = {
    ("linear", 2): {
        1: ([4.71e-3, 1.21e-3, 3.34e-4, 1.07e-4, 4.25e-5], [1.96, 1.86, 1.64, 1.33]),
        2: ([3.53e-4, 8.83e-5, 2.21e-5, 5.51e-6, 1.38e-6], [2.00, 2.00, 2.00, 2.00]),
        3: ([1.06e-5, 1.30e-6, 1.63e-7, 2.04e-8, 2.55e-9], [2.20, 3.82, 3.00, 3.00]),
        4: ([1.64e-8, 9.74e-10, 6.21e-11, 4.24e-12, 1.36e-12], [4.07, 3.97, 3.87, 1.64]),
    },
    ("linear", 4): {
        1: ([7.22e-3, 1.84e-3, 4.91e-4, 1.47e-4, 5.39e-5], [1.97, 1.91, 1.73, 1.45]),
        2: ([1.46e-3, 3.65e-4, 9.13e-5, 2.28e-5, 5.71e-6], [2.00, 2.00, 2.00, 2.00]),
        3: ([4.59e-5, 5.42e-6, 6.71e-7, 8.38e-8, 1.05e-8], [3.08, 3.01, 3.00, 3.00]),
        4: ([1.04e-7, 6.40e-9, 4.01e-10, 2.60e-11, 2.62e-12], [4.02, 4.00, 3.95, 3.31]),
    },
    ("bruss", 2): {
        1: ([3.43e-4, 9.90e-5, 3.00e-5, 9.94e-6, 3.68e-6], [1.79, 1.72, 1.59, 1.43]),
        2: ([1.41e-5, 5.23e-6, 1.48e-6, 3.90e-7, 9.98e-8], [1.43, 1.82, 1.92, 1.97]),
        3: ([1.92e-5, 2.01e-6, 2.21e-7, 2.55e-8, 3.06e-9], [3.26, 3.19, 3.12, 3.06]),
        4: ([3.29e-6, 3.19e-8, 6.43e-10, 2.01e-11, 1.04e-12], [6.69, 5.63, 5.00, 4.27]),
    },
    ("bruss", 4): {
        1: ([4.88e-4, 1.40e-4, 4.16e-5, 1.33e-5, 4.74e-6], [1.80, 1.75, 1.65, 1.49]),
        2: ([7.18e-5, 2.29e-5, 6.24e-6, 1.62e-6, 4.11e-7], [1.65, 1.88, 1.95, 1.98]),
        3: ([1.04e-4, 9.87e-6, 1.02e-6, 1.13e-7, 1.31e-8], [3.40, 3.27, 3.17, 3.11]),
        4: ([7.72e-4, 8.89e-8, 1.40e-9, 1.82e-11, 9.71e-13], [13.08, 5.99, 6.27, 4.23]),
    },
    ("bruss-pde", 2): {
        1: ([6.27e-6, 5.51e-6, 4.91e-6, 4.42e-6, 4.01e-6], [1.61, 1.56, 1.52, 1.51]),
        2: ([3.03e-7, 2.59e-7, 2.23e-7, 1.94e-7, 1.71e-7], [1.96, 2.02, 2.02, 1.96]),
        3: ([3.24e-9, 2.54e-9, 2.02e-9, 1.64e-9, 1.35e-9], [3.04, 3.09, 3.02, 3.01]),
        4: ([1.15e-11, 8.04e-12, 5.99e-12, 4.81e-12, 3.72e-12], [4.47, 3.97, 3.18, 3.98]),
    },
}


def record(k: int, ok: bool, detail: str = "") -> None:
    line = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}"
    RESULTS[k] = line + (f"  {detail}" if detail else "")
    print(RESULTS[k])


def finish(k: int, problems: list, detail: str = "") -> None:
    record(k, not problems, detail if not problems else "; ".join(problems[:6]))
    assert not problems, "\n".join(problems)


def check_ge(problems, tag, N, ours, ref, rel):
    if abs(ours - ref) > rel * ref:
        problems.append(f"{tag} N={N} ge {ours:.3e} vs {ref:.2e} (>{rel:.0%})")


def check_on(problems, tag, N, ours, ref, tol):
    if ours is None or abs(ours - ref) > tol:
        problems.append(f"{tag} N={N} O_N {ours:.2f} vs {ref:.2f} (>±{tol})")


def linear_table_problems(base: int, on_tol3: float) -> list:
    """Criteria 1 and 2 share their rules except the p=3 O_N tolerance."""
    P = get_problem("linear")
    problems = []
    for p, (ge_ref, on_ref) in TABLES[("linear", base)].items():
        rows = converge(P, p, base, NS)
        tag = f"base {base} p={p}"
        for r, g in zip(rows, ge_ref):
            if p == 4 and r.N == 16000:
                if not r.ge < 1e-11:
                    problems.append(f"{tag} N=16000 ge {r.ge:.3e} not < 1e-11")
                continue
            check_ge(problems, tag, r.N, r.ge, g, 0.10 if p in (2, 3) else 0.15)
        on_tol = {1: 0.3, 2: 0.05, 3: on_tol3}.get(p)
        if on_tol is not None:
            for r, o in zip(rows[1:], on_ref):
                check_on(problems, tag, r.N, r.order_estimate, o, on_tol)
    return problems


def test_criterion_01_linear_base2():
    finish(1, linear_table_problems(2, 0.35), "linear base 2, 20 cells")


def test_criterion_02_linear_base4():
    finish(2, linear_table_problems(4, 0.1), "linear base 4, 20 cells")


def test_criterion_03_brusselator():
    P = get_problem("bruss")
    problems = []
    for base in (2, 4):
        for p, (ge_ref, on_ref) in TABLES[("bruss", base)].items():
            rows = converge(P, p, base, NS)
            tag = f"base {base} p={p}"
            for r, g in zip(rows, ge_ref):
                check_ge(problems, tag, r.N, r.ge, g, 0.20)
            if p == 2:
                for r, o in zip(rows[1:], on_ref):
                    check_on(problems, tag, r.N, r.order_estimate, o, 0.15)
    finish(3, problems, "Brusselator bases 2 and 4, 40 cells")


def test_criterion_04_pde_table():
    P = get_problem("bruss-pde")
    truth = truth_at(P, P.X)
    ref = lambda x: truth_at(P, x)  # noqa: E731
    ge = {p: [] for p in range(1, 5)}
    seconds = []
    for N in NS_PDE:
        grid = pattern_grid(P.x0, P.X, N, 2)
        t0 = time.perf_counter()
        for p in ge:
            ge[p].append(global_error(integrate(P, grid, p, ref=ref), truth))
        seconds.append(time.perf_counter() - t0)
    problems = []
    for p, (ge_ref, on_ref) in TABLES[("bruss-pde", 2)].items():
        rows = attach_orders(zip(NS_PDE, ge[p]))
        tag = f"p={p}"
        for r, g in zip(rows, ge_ref):
            if p == 4:
                if not r.ge < 5 * g:
                    problems.append(f"{tag} N={r.N} ge {r.ge:.3e} not < 5 x {g:.2e}")
            else:
                check_ge(problems, tag, r.N, r.ge, g, 0.20)
        if p in (2, 3):
            for r, o in zip(rows[1:], on_ref):
                check_on(problems, tag, r.N, r.order_estimate, o, 0.2)
    for N, s in zip(NS_PDE, seconds):
        if s > 60:
            problems.append(f"column N={N} took {s:.1f} s (> 60 s)")
    finish(4, problems, f"slowest column {max(seconds):.1f} s")


def _rational_phi1() -> Fraction:
    """Order-1 error constant in exact arithmetic from the tableau's short rationals."""
    t = method(1)
    q = {k: Fraction(float(np.ravel(getattr(t, k))[0])).limit_denominator(10**6)
         for k in ("c", "B", "Bbar", "V")}
    # 1/2! - B c - Bbar - V (-0)^2/2!
    return Fraction(1, 2) - q["B"] * q["c"] - q["Bbar"]


def test_criterion_05_error_constants():
    phi = {p: method_error_constant(method(p)) for p in range(1, 5)}
    problems = []
    if abs(_rational_phi1()) != Fraction(1, 1000):
        problems.append(f"rational |phi_1| = {abs(_rational_phi1())}")
    for p, tol in ((2, 1e-12), (3, 1e-10)):
        if abs(abs(phi[p]) - 1e-3) > tol:
            problems.append(f"|phi_{p}| = {abs(phi[p]):.15e}")
    if abs(abs(phi[4]) - 2e-3) > 0.2 * 2e-3:
        problems.append(f"|phi_4| = {abs(phi[4]):.4e}")
    finish(5, problems, f"phi_1={_rational_phi1()} " +
           " ".join(f"phi_{p}={phi[p]:.4e}" for p in (2, 3, 4)))


def test_criterion_06_order_condition_closure():
    rep = verify_sweep((1, 2, 3, 4), samples=1000, seed=2024)
    residual_failures = [f for f in rep.failures if "residual" in f]
    worst = {p: max(s["max_stage_residual"], s["max_output_residual"])
             for p, s in rep.summary().items()}
    finish(6, residual_failures, " ".join(f"p={p}:{w:.1e}" for p, w in worst.items()))


def test_criterion_07_closed_forms():
    rng = np.random.default_rng(7)
    problems = []
    worst = {}
    for p in (2, 3):
        devs = [closed_form_deviation(p, s) for s in rng.uniform(0.5, 2.0, size=(200, p - 1))]
        worst[p] = max(devs)
        if worst[p] > 1e-10:
            problems.append(f"p={p} max relative gap {worst[p]:.2e}")
    finish(7, problems, " ".join(f"p={p}:{w:.1e}" for p, w in worst.items()))


def test_criterion_08_fixed_stepsize():
    problems = []
    worst = {}
    for p in range(1, 5):
        worst[p] = max(fixed_stepsize_check(method(p)))
        if worst[p] >= TIER_TOL[p]:
            problems.append(f"p={p} residual {worst[p]:.2e} >= {TIER_TOL[p]:.0e}")
    finish(8, problems, " ".join(f"p={p}:{w:.1e}" for p, w in worst.items()))


def test_criterion_09_zero_stability():
    rng = np.random.default_rng(9)
    problems = []
    worst = {}
    for p in range(1, 5):
        sigmas = rng.uniform(0.5, 2.0, size=(1000, p - 1))
        rep = zero_stability_product(lambda s, p=p: method(p, s), sigmas)
        worst[p] = rep.max_deviation
        if rep.n_factors != 1000 or rep.max_deviation > 1e-12:
            problems.append(f"p={p} deviation {rep.max_deviation:.2e}")
    finish(9, problems, " ".join(f"p={p}:{w:.1e}" for p, w in worst.items()))


def _exp_defect(p: int, sigma, h: float, x: float = 0.3) -> float:
    P = OdeSystem("exp", 1, lambda y: y, lambda y: y, np.array([1.0]), 0.0, 1.0,
                  lambda s: np.array([np.exp(s)]))
    t = method(p, sigma)
    blocks = np.exp(x - t.sigma.cumulative * h)[:, None]
    out = step(t, SolutionState(p - 1, x, blocks), h, P)
    return abs(out.blocks[0, 0] - np.exp(x + h))


# order 1 has phi = 1e-3 against an h^3/6 next term, so its asymptotic range starts lower
H0 = {1: 2e-4, 2: 1e-2, 3: 1e-2, 4: 1e-2}
NONUNIT = {2: [1.5], 3: [1.5, 0.7], 4: [1.5, 0.7, 1.2]}


def test_criterion_10_local_order():
    problems = []
    ratios = []
    cases = [(p, np.ones(p - 1)) for p in range(1, 5)] + [(p, np.array(s)) for p, s in NONUNIT.items()]
    for p, sig in cases:
        q = _exp_defect(p, sig, H0[p]) / _exp_defect(p, sig, H0[p] / 2)
        ratios.append(f"{q:.2f}")
        if abs(q - 2 ** (p + 1)) > 0.1 * 2 ** (p + 1):
            problems.append(f"p={p} sigma={sig.tolist()} ratio {q:.3f} vs {2 ** (p + 1)}")
    finish(10, problems, "ratios " + " ".join(ratios))


def test_criterion_11_rk_stability():
    t = order2(1.0)
    rng = np.random.default_rng(11)
    zs = rng.uniform(-3, 1, 20) + 1j * rng.uniform(-3, 3, 20)
    dets = [abs(np.linalg.det(propagation_matrix(t, z))) for z in zs]
    problems = [f"|det M({z:.2f})| = {d:.2e}" for z, d in zip(zs, dets) if d > 1e-12]
    finish(11, problems, f"max |det M| {max(dets):.1e} over 20 z")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
