"""Benchmark problems and a high-accuracy reference integrator.

Every problem supplies ``g = f'(y) f(y)`` in closed form. The state of the
method-of-lines Brusselator is laid out as ``[u_1..u_N, v_1..v_N]``.
"""
from __future__ import annotations

import threading

import numpy as np

from .core import OdeSystem
from .rhs import KERNEL_BRUSS, KERNEL_BRUSS_PDE, KERNEL_LINEAR, make_fg


def linear2d() -> OdeSystem:
    """``y' = M y`` with ``M = [[1, 1], [-2, -1]]``; ``M^2 = -I`` so ``g(y) = -y``."""
    def exact(x):
        s, c = np.sin(x), np.cos(x)
        return np.array([3 * s + 2 * c, c - 5 * s])

    sys = linear_system([[1.0, 1.0], [-2.0, -1.0]], y0=[2.0, 1.0], X=5 * np.pi, name="linear")
    return OdeSystem(name=sys.name, m=2, f=sys.f, g=sys.g, y0=sys.y0, X=sys.X,
                     exact=exact, kernel=sys.kernel)


def linear_system(M, y0, X: float = 1.0, name: str = "linear-m") -> OdeSystem:
    """Constant-coefficient system ``y' = M y``, for which ``g(y) = M^2 y``."""
    M = np.asarray(M, dtype=float)
    m = M.shape[0]
    kernel = (KERNEL_LINEAR, np.concatenate([M.ravel(), (M @ M).ravel()]))
    f, g = make_fg(*kernel, m)
    return OdeSystem(name=name, m=m, f=f, g=g, y0=y0, X=X, kernel=kernel)


def brusselator() -> OdeSystem:
    """``y1' = 1 + y1^2 y2 - 4 y1``, ``y2' = 3 y1 - y1^2 y2`` on [0, 20]."""
    kernel = (KERNEL_BRUSS, np.empty(0))
    f, g = make_fg(*kernel, 2)
    return OdeSystem(name="bruss", m=2, f=f, g=g, y0=[1.5, 3.0], x0=0.0, X=20.0, kernel=kernel)


def brusselator_pde(Ngrid: int = 50, alpha: float = 1 / 50, A: float = 1.0, B: float = 3.0) -> OdeSystem:
    """Brusselator with diffusion on (0, 1), semi-discretized on ``Ngrid`` interior points.

    Dirichlet data ``u = A``, ``v = B`` at both ends; ``u(x, 0) = 1 + sin(2 pi x)``,
    ``v(x, 0) = 3``. Second differences use spacing ``1 / (Ngrid + 1)``.
    """
    if Ngrid < 2:
        raise ValueError("need at least two interior grid points")
    N = int(Ngrid)
    dx = 1.0 / (N + 1)
    xs = dx * np.arange(1, N + 1)
    kernel = (KERNEL_BRUSS_PDE, np.array([N, A, B, alpha / dx**2], dtype=float))
    f, g = make_fg(*kernel, 2 * N)
    y0 = np.concatenate([1 + np.sin(2 * np.pi * xs), np.full(N, 3.0)])
    return OdeSystem(name="bruss-pde", m=2 * N, f=f, g=g, y0=y0, x0=0.0, X=10.0, kernel=kernel)


def stack_uv(u, v) -> np.ndarray:
    return np.concatenate([np.asarray(u, float), np.asarray(v, float)])


def split_uv(y) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=float)
    N = y.size // 2
    return y[:N], y[N:]


PROBLEMS = {
    "linear": linear2d,
    "bruss": brusselator,
    "bruss-pde": brusselator_pde,
}


def get_problem(name: str, **kwargs) -> OdeSystem:
    try:
        return PROBLEMS[name](**kwargs)
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None


# -- reference integrator: Dormand-Prince 5(4) with PI step control --------------

_DP_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
# fifth- minus fourth-order weights
_DP_E = _DP_B - np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640,
                          -92097 / 339200, 187 / 2100, 1 / 40])


class StepLimitExceeded(RuntimeError):
    pass


def dopri5(f, x0: float, y0, x_end: float, atol: float = 1e-13, rtol: float = 1e-13,
           max_steps: int = 2_000_000) -> np.ndarray:
    """Integrate ``y' = f(y)`` from x0 to x_end and return ``y(x_end)``."""
    y = np.array(y0, dtype=float)
    x = float(x0)
    if x_end == x:
        return y
    direction = np.sign(x_end - x)
    span = abs(x_end - x)

    def err_norm(e, ya, yb):
        sc = atol + rtol * np.maximum(np.abs(ya), np.abs(yb))
        return np.sqrt(np.mean((e / sc) ** 2))

    k1 = f(y)
    # initial step guess, Hairer-Norsett-Wanner II.4
    d0 = err_norm(y, y, y) or 1e-5
    d1 = err_norm(k1, y, y) or 1e-5
    h0 = 0.01 * d0 / d1
    y1 = y + direction * h0 * k1
    d2 = err_norm(f(y1) - k1, y, y) / h0
    h1 = (0.01 / max(d1, d2)) ** 0.2 if max(d1, d2) > 1e-15 else max(1e-6, h0 * 1e-3)
    h = min(100 * h0, h1, span)

    beta = 0.04
    alpha = 0.2 - 0.75 * beta
    err_old = 1e-4
    K = np.empty((7, y.size))
    steps = 0
    rejected = False
    while True:
        if steps >= max_steps:
            raise StepLimitExceeded(f"more than {max_steps} steps")
        last = abs(x_end - x) <= h * (1 + 1e-12)
        if last:
            h = abs(x_end - x)
        hs = direction * h
        K[0] = k1
        for i in range(1, 7):
            K[i] = f(y + hs * (np.asarray(_DP_A[i]) @ K[:i]))
        y_new = y + hs * (_DP_B @ K)
        err = err_norm(hs * (_DP_E @ K), y, y_new)
        if not np.isfinite(err):
            raise FloatingPointError(f"non-finite solution near x = {x!r}")
        steps += 1
        if err <= 1.0:
            x = x_end if last else x + hs
            y = y_new
            k1 = K[6]
            if last:
                return y
            fac = 0.9 * err ** (-alpha) * err_old ** beta if err > 0 else 10.0
            fac = min(10.0, max(0.2, fac))
            if rejected:
                fac = min(1.0, fac)
            err_old = max(err, 1e-4)
            h *= fac
            rejected = False
        else:
            h *= max(0.2, 0.9 * err ** (-alpha))
            rejected = True


def rk4_fixed(f, x0: float, y0, x_end: float, nsteps: int) -> np.ndarray:
    """Classical fourth-order Runge-Kutta with constant stepsize (a cross-check oracle)."""
    y = np.array(y0, dtype=float)
    h = (x_end - x0) / nsteps
    for _ in range(nsteps):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


_ref_cache: dict = {}
_ref_lock = threading.Lock()


def reference_solution(problem: OdeSystem, x_end: float, atol: float = 1e-13,
                       rtol: float = 1e-13) -> np.ndarray:
    """``y(x_end)`` from the Dormand-Prince integrator; memoized per problem and tolerance."""
    key = (problem.name, problem.m, problem.y0.tobytes(), float(problem.x0), float(x_end), atol, rtol)
    with _ref_lock:
        hit = _ref_cache.get(key)
    if hit is not None:
        return hit.copy()
    y = dopri5(problem.f, problem.x0, problem.y0, x_end, atol=atol, rtol=rtol)
    y.setflags(write=False)
    with _ref_lock:
        _ref_cache[key] = y
    return y.copy()
