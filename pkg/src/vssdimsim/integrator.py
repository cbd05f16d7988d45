"""Fixed-grid integration with the explicit VS SDIMSIMs.

The input vector at step n holds ``[y_n, y_{n-1}, ..., y_{n-p+1}]``; the march
starts at ``x_{p-1}`` from exact or reference starting values. Every output
block is computed from the method, so blocks 2..r are order-p approximations
of past values rather than copies of them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _backend, _fallback
from .core import Grid, OdeSystem, SolutionState, Tableau
from .problems import reference_solution
from .tableau import method_stack

ORDERS = (1, 2, 3, 4)


@dataclass(frozen=True, eq=False)
class IntegrationResult:
    y_final: np.ndarray
    state_final: SolutionState
    n_steps: int
    n_f_evals: int
    n_g_evals: int
    trajectory: Optional[list] = field(default=None)
    backend: str = "python"


def _check_order(p: int) -> int:
    if p not in ORDERS:
        raise ValueError(f"order must be one of {ORDERS}, got {p}")
    return int(p)


def starting_state(problem: OdeSystem, grid: Grid, p: int,
                   ref: Optional[Callable[[float], np.ndarray]] = None) -> SolutionState:
    """Input vector at ``x_{p-1}``: ``[y(x_{p-1}), ..., y(x_0)]``.

    Uses ``problem.exact`` when present, then ``ref``, then the built-in
    reference integrator. ``y(x_0)`` is always the initial value itself.
    """
    p = _check_order(p)
    if grid.points.size < p + 1:
        raise ValueError(f"grid has {grid.points.size} points; order {p} needs at least {p + 1}")
    if problem.exact is not None:
        value = problem.exact
    elif ref is not None:
        value = ref
    else:
        def value(x):
            return reference_solution(problem, x)
    blocks = [problem.y0 if k == 0 else np.asarray(value(grid.points[k]), dtype=float)
              for k in range(p - 1, -1, -1)]
    return SolutionState(n=p - 1, x=float(grid.points[p - 1]), blocks=np.array(blocks))


def _single(t: Tableau) -> dict:
    return {k: np.asarray(getattr(t, k))[None] for k in ("A", "Abar", "U", "B", "Bbar", "V")}


def step(t: Tableau, state: SolutionState, h: float, problem: OdeSystem) -> SolutionState:
    """One step of size ``h`` with the method ``t`` (already evaluated at this step's ratios)."""
    if not h > 0:
        raise ValueError("stepsize must be positive")
    if state.r != t.r:
        raise ValueError(f"state has {state.r} blocks, method needs {t.r}")
    c = _single(t)
    y, _ = _fallback.march(problem.f, problem.g, c["A"], c["Abar"], c["U"], c["B"],
                           c["Bbar"], c["V"], np.array([h]), state.blocks)
    return SolutionState(n=state.n + 1, x=state.x + h, blocks=y)


def integrate(problem: OdeSystem, grid: Grid, p: int, backend: str = "auto",
              start: Optional[SolutionState] = None, sample_every: Optional[int] = None,
              ref: Optional[Callable[[float], np.ndarray]] = None) -> IntegrationResult:
    """Integrate ``problem`` across ``grid`` with the order-p method.

    Parameters
    ----------
    backend : {"auto", "compiled", "python"}
        Stepping loop. Problems without a built-in kernel always run in Python.
    start : SolutionState, optional
        Overrides the starting values; must sit at index ``p - 1``.
    sample_every : int, optional
        Record ``(x, y)`` every this many steps (and at the end).
    """
    p = _check_order(p)
    if grid.points.size < p + 1:
        raise ValueError(f"grid has {grid.points.size} points; order {p} needs at least {p + 1}")
    state = start if start is not None else starting_state(problem, grid, p, ref=ref)
    if state.n != p - 1 or state.r != p or state.m != problem.m:
        raise ValueError("starting state does not match the order or problem")
    which = _backend.resolve(backend)
    if problem.kernel is None:
        which = "python"
    h = grid.steps[p - 1:]
    coeffs = method_stack(p, grid.ratio_matrix(p - 1))
    blocks = state.blocks
    evals = 0
    trajectory = None
    if sample_every is None:
        blocks, evals = _backend.march(problem, coeffs, h, blocks, backend=which)
    else:
        if sample_every < 1:
            raise ValueError("sample_every must be positive")
        trajectory = [(float(grid.points[p - 1]), blocks[0].copy())]
        for lo in range(0, h.size, sample_every):
            hi = min(lo + sample_every, h.size)
            chunk = {k: (v if k == "c" else v[lo:hi]) for k, v in coeffs.items()}
            blocks, e = _backend.march(problem, chunk, h[lo:hi], blocks, backend=which)
            evals += e
            trajectory.append((float(grid.points[p - 1 + hi]), blocks[0].copy()))
    final = SolutionState(n=grid.N, x=grid.X, blocks=blocks)
    return IntegrationResult(y_final=np.array(blocks[0]), state_final=final, n_steps=h.size,
                             n_f_evals=evals, n_g_evals=evals, trajectory=trajectory,
                             backend=which)


def truth_at(problem: OdeSystem, x: float) -> np.ndarray:
    """Exact solution if known, else the reference solution."""
    if problem.exact is not None:
        return np.asarray(problem.exact(x), dtype=float)
    return reference_solution(problem, x)


def global_error(result: IntegrationResult, truth, norm: str = "2") -> float:
    """``||y_N - truth||`` in the 2-norm (default) or max-norm (``norm="inf"``).

    ``truth`` is either a vector or a callable evaluated at ``x_N``.
    """
    if callable(truth):
        truth = truth(result.state_final.x)
    d = result.y_final - np.asarray(truth, dtype=float)
    if norm == "2":
        return float(np.linalg.norm(d))
    if norm == "inf":
        return float(np.abs(d).max())
    raise ValueError(f"unknown norm {norm!r}; use '2' or 'inf'")
