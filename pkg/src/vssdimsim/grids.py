"""Stepsize grids: the rapidly varying test pattern and plain uniform grids."""
from __future__ import annotations

import numpy as np

from .core import Grid


def _cumsum_compensated(x0: float, h: np.ndarray) -> np.ndarray:
    # Kahan summation keeps every point within an ulp or so of the exact partial sum
    pts = np.empty(h.size + 1)
    total, comp = float(x0), 0.0
    pts[0] = total
    for k, hk in enumerate(h.tolist(), start=1):
        y = hk - comp
        t = total + y
        comp = (t - total) - y
        total = t
        pts[k] = total
    return pts


def _from_steps(x0: float, X: float, h: np.ndarray) -> Grid:
    pts = _cumsum_compensated(x0, h)
    pts[-1] = X
    return Grid(points=pts, steps=h)


def pattern_grid(x0: float, X: float, N: int, base: float) -> Grid:
    """Grid with ``h_{n+1} = base**((-1)**n * sin(5 pi n / (X - x0))) * h_n``.

    Starting from ``h_0 = (X - x0) / N``, the N steps are generated by the
    recursion above and then scaled by a common factor so that the last
    point lands on X exactly. The scaling leaves every step ratio unchanged.
    """
    if not X > x0:
        raise ValueError("need X > x0")
    if N < 1:
        raise ValueError("need at least one step")
    if not base > 0:
        raise ValueError("pattern base must be positive")
    L = X - x0
    n = np.arange(N - 1)
    expo = np.where(n % 2 == 0, 1.0, -1.0) * np.sin(5 * np.pi * n / L)
    # cumulative product in log space keeps the recursion exact for base = 1
    logh = np.concatenate(([0.0], np.cumsum(expo * np.log(base))))
    h = np.exp(logh) * (L / N)
    if not np.all(np.isfinite(h)):
        raise FloatingPointError("non-finite stepsize in pattern")
    h *= L / h.sum()
    return _from_steps(x0, X, h)


def uniform_grid(x0: float, X: float, N: int) -> Grid:
    if not X > x0:
        raise ValueError("need X > x0")
    if N < 1:
        raise ValueError("need at least one step")
    h = np.full(N, (X - x0) / N)
    return _from_steps(x0, X, h)
