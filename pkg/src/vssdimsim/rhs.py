"""Built-in right-hand sides, described by a ``(kind, params)`` pair.

The compiled kernel implements the same kinds in C; these numpy versions
are what :mod:`vssdimsim.problems` hands out as ``f`` and ``g``.
"""
from __future__ import annotations

import numpy as np

KERNEL_LINEAR = 0
KERNEL_BRUSS = 1
KERNEL_BRUSS_PDE = 2


def make_fg(kind: int, params: np.ndarray, m: int):
    """Return ``(f, g)`` callables for a built-in kernel description."""
    params = np.asarray(params, dtype=float)
    if kind == KERNEL_LINEAR:
        M = params[: m * m].reshape(m, m)
        M2 = params[m * m: 2 * m * m].reshape(m, m)
        return (lambda y: M @ y), (lambda y: M2 @ y)
    if kind == KERNEL_BRUSS:
        def f(y):
            w = y[0] * y[0] * y[1]
            return np.array([1.0 + w - 4.0 * y[0], 3.0 * y[0] - w])

        def g(y):
            y1, y2 = y
            F = f(y)
            return np.array([(2 * y1 * y2 - 4.0) * F[0] + y1 * y1 * F[1],
                             (3.0 - 2 * y1 * y2) * F[0] - y1 * y1 * F[1]])
        return f, g
    if kind == KERNEL_BRUSS_PDE:
        N = int(params[0])
        A, B, k = params[1], params[2], params[3]

        def lap(w, bc):
            out = -2.0 * w
            out[1:] += w[:-1]
            out[:-1] += w[1:]
            out[0] += bc
            out[-1] += bc
            return out

        def f(y):
            u, v = y[:N], y[N:]
            w = u * u * v
            return np.concatenate([A + w - (B + 1) * u + k * lap(u, A), B * u - w + k * lap(v, B)])

        def g(y):
            u, v = y[:N], y[N:]
            F = f(y)
            fu, fv = F[:N], F[N:]
            uv2 = 2 * u * v
            uu = u * u
            return np.concatenate([(uv2 - (B + 1)) * fu + uu * fv + k * lap(fu, 0.0),
                                   (B - uv2) * fu - uu * fv + k * lap(fv, 0.0)])
        return f, g
    raise ValueError(f"unknown kernel kind {kind}")
