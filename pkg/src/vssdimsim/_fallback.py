"""Pure-Python stepping loop.

Same contract as the compiled ``_kernels`` module: march an input vector of
``r`` blocks across precomputed per-step coefficient stacks.
"""
from __future__ import annotations

import numpy as np

from .core import NonFiniteStage
from .rhs import make_fg


def march(f, g, A, Abar, U, B, Bbar, V, h, blocks):
    """Advance ``blocks`` (r x m) through ``len(h)`` steps.

    Coefficient arrays carry one slice per step. Returns the final blocks and
    the number of f (equal to g) evaluations.
    """
    y = np.array(blocks, dtype=float)
    nsteps = len(h)
    s = A.shape[1]
    m = y.shape[1]
    F = np.empty((s, m))
    G = np.empty((s, m))
    # overflow surfaces as NonFiniteStage below, so numpy need not warn about it
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(nsteps):
            hn = h[n]
            hh = hn * hn
            An, Abn, Un = A[n], Abar[n], U[n]
            for i in range(s):
                Yi = Un[i] @ y
                if i:
                    Yi = Yi + hn * (An[i, :i] @ F[:i]) + hh * (Abn[i, :i] @ G[:i])
                F[i] = f(Yi)
                G[i] = g(Yi)
                if not (np.isfinite(F[i]).all() and np.isfinite(G[i]).all()):
                    raise NonFiniteStage(n, i)
            y = hn * (B[n] @ F) + hh * (Bbar[n] @ G) + V[n] @ y
    return y, nsteps * s


def march_builtin(kind, params, A, Abar, U, B, Bbar, V, h, blocks):
    m = np.shape(blocks)[1]
    f, g = make_fg(kind, params, m)
    return march(f, g, A, Abar, U, B, Bbar, V, h, blocks)
