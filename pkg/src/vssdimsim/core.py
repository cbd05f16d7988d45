"""Domain types shared across the package.

All value types are frozen dataclasses whose numpy arrays are marked
read-only on construction, so a tableau or grid can be handed between
threads without copying.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

ROW_SUM_TOL = 1e-12
G_CONSISTENCY_TOL = 1e-5


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


class NonFiniteStage(FloatingPointError):
    """f or g returned inf/nan while evaluating a stage."""

    def __init__(self, step: int, stage: int):
        super().__init__(f"non-finite f or g at step {step}, stage {stage + 1}")
        self.step = step
        self.stage = stage


@dataclass(frozen=True, eq=False)
class StepRatios:
    """Ratios ``h_{n-i} / h_n`` of past stepsizes to the current one, i = 1..rho."""

    values: np.ndarray

    def __post_init__(self):
        v = _frozen(np.atleast_1d(np.asarray(self.values, dtype=float)))
        if v.ndim != 1:
            raise ValueError("step ratios must be a vector")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValueError(f"step ratios must be positive and finite, got {v}")
        object.__setattr__(self, "values", v)

    @classmethod
    def ones(cls, rho: int) -> "StepRatios":
        return cls(np.ones(rho))

    @classmethod
    def coerce(cls, sigma) -> "StepRatios":
        if isinstance(sigma, StepRatios):
            return sigma
        return cls(np.asarray(sigma, dtype=float).reshape(-1))

    def __len__(self) -> int:
        return self.values.size

    @property
    def cumulative(self) -> np.ndarray:
        """``[0, s1, s1+s2, ...]``: distances of past points from x_n in units of h_n."""
        return np.concatenate(([0.0], np.cumsum(self.values)))


@dataclass(frozen=True, eq=False)
class Tableau:
    """Coefficients of one explicit VS SDIMSIM evaluated at a ratio vector.

    The stage and output relations are::

        Y = h A f(Y) + h^2 Abar g(Y) + U y[n]
        y[n+1] = h B f(Y) + h^2 Bbar g(Y) + V y[n]
    """

    p: int
    c: np.ndarray
    A: np.ndarray
    Abar: np.ndarray
    U: np.ndarray
    B: np.ndarray
    Bbar: np.ndarray
    V: np.ndarray
    sigma: StepRatios

    def __post_init__(self):
        for name in ("c", "A", "Abar", "U", "B", "Bbar", "V"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "sigma", StepRatios.coerce(self.sigma))
        object.__setattr__(self, "p", int(self.p))

    @property
    def s(self) -> int:
        return self.A.shape[0]

    @property
    def r(self) -> int:
        return self.V.shape[0]

    @property
    def rho(self) -> int:
        return len(self.sigma)

    @property
    def v(self) -> np.ndarray:
        """The row vector of the rank-one ``V = e v^T``."""
        return self.V[0]

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "c": self.c.tolist(),
            "A": self.A.tolist(),
            "Abar": self.Abar.tolist(),
            "U": self.U.tolist(),
            "B": self.B.tolist(),
            "Bbar": self.Bbar.tolist(),
            "V": self.V.tolist(),
            "sigma": self.sigma.values.tolist(),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "Tableau":
        return cls(
            p=d["p"], c=d["c"], A=d["A"], Abar=d["Abar"], U=d["U"],
            B=d["B"], Bbar=d["Bbar"], V=d["V"], sigma=StepRatios(np.asarray(d["sigma"], float)),
        )

    @classmethod
    def from_json(cls, text: str) -> "Tableau":
        return cls.from_dict(json.loads(text))

    def replace(self, **changes) -> "Tableau":
        """Copy with some fields swapped out (used to build perturbed tableaus in tests)."""
        fields = self.to_dict()
        fields["sigma"] = self.sigma
        fields.update(changes)
        return Tableau(**fields)


@dataclass
class ValidationReport:
    problems: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        return "pass" if self.ok else "\n".join(self.problems)


def validate_tableau(t: Tableau) -> ValidationReport:
    """Check the structural constraints of the explicit p = q = r = s class.

    Returns a report listing every violation; never raises.
    """
    rep = ValidationReport()
    bad = rep.problems
    p, s, r = t.p, t.A.shape[0], t.V.shape[0]

    if p < 1:
        bad.append(f"order p={p} must be >= 1")
    if not (s == r == p):
        bad.append(f"need p = r = s, got p={p}, r={r}, s={s}")
    if t.rho != p - 1:
        bad.append(f"need rho = p - 1 = {p - 1}, got {t.rho}")
    shapes = {"c": (s,), "A": (s, s), "Abar": (s, s), "U": (s, r),
              "B": (r, s), "Bbar": (r, s), "V": (r, r)}
    for name, shape in shapes.items():
        got = getattr(t, name).shape
        if got != shape:
            bad.append(f"{name} has shape {got}, expected {shape}")
    if bad:
        return rep

    for name in ("c", "A", "Abar", "U", "B", "Bbar", "V"):
        arr = getattr(t, name)
        if not np.all(np.isfinite(arr)):
            idx = np.argwhere(~np.isfinite(arr)).tolist()
            bad.append(f"{name} has non-finite entries at {idx}")
    if bad:
        return rep

    for name in ("A", "Abar"):
        upper = np.triu(getattr(t, name))
        for i, j in np.argwhere(upper != 0):
            bad.append(f"{name}[{i},{j}] = {upper[i, j]!r} is not strictly lower triangular")

    for i, total in enumerate(t.U.sum(axis=1)):
        if abs(total - 1.0) > ROW_SUM_TOL:
            bad.append(f"U row {i} sums to {total!r} (residual {total - 1.0:.3e})")

    dev = np.abs(t.V - t.V[0]).max(axis=1)
    for i in np.nonzero(dev > ROW_SUM_TOL)[0]:
        bad.append(f"V not rank-one e v^T: row {i} differs from row 0 by {dev[i]:.3e}")
    vsum = t.V[0].sum()
    if abs(vsum - 1.0) > ROW_SUM_TOL:
        bad.append(f"v^T e = {vsum!r} (residual {vsum - 1.0:.3e})")
    return rep


@dataclass(frozen=True, eq=False)
class OdeSystem:
    """Autonomous problem ``y' = f(y)`` with its second derivative ``g = f'(y) f(y)``.

    ``kernel`` optionally names a built-in right-hand side that the compiled
    stepping kernel can evaluate without calling back into Python; it is a
    ``(kind, params)`` pair understood by :mod:`vssdimsim._fallback`.
    """

    name: str
    m: int
    f: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    y0: np.ndarray
    x0: float = 0.0
    X: float = 1.0
    exact: Optional[Callable[[float], np.ndarray]] = None
    kernel: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "y0", _frozen(self.y0))
        if self.y0.shape != (self.m,):
            raise ValueError(f"y0 has shape {self.y0.shape}, expected ({self.m},)")


def fd_jacobian(f: Callable, y: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of ``f`` at ``y``."""
    y = np.asarray(y, dtype=float)
    m = y.size
    J = np.empty((m, m))
    for k in range(m):
        d = eps * max(1.0, abs(y[k]))
        yp, ym = y.copy(), y.copy()
        yp[k] += d
        ym[k] -= d
        J[:, k] = (f(yp) - f(ym)) / (2 * d)
    return J


def g_consistency(problem: OdeSystem, y, tol: float = G_CONSISTENCY_TOL) -> tuple[bool, float]:
    """Compare ``g(y)`` with ``J_fd(y) f(y)``.

    Returns ``(passed, scaled_residual)`` where the residual is
    ``|g - J f|_inf / (1 + |g|_inf)``.
    """
    y = np.asarray(y, dtype=float)
    gy = problem.g(y)
    jf = fd_jacobian(problem.f, y) @ problem.f(y)
    res = np.abs(gy - jf).max() / (1.0 + np.abs(gy).max())
    return bool(res <= tol), float(res)


@dataclass(frozen=True, eq=False)
class Grid:
    """Strictly increasing abscissae ``x_0 < ... < x_N`` with their stepsizes."""

    points: np.ndarray
    steps: np.ndarray

    def __post_init__(self):
        pts = _frozen(self.points)
        h = _frozen(self.steps)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("a grid needs at least two points")
        if h.shape != (pts.size - 1,):
            raise ValueError("steps must have one entry fewer than points")
        if not np.all(h > 0) or not np.all(np.diff(pts) > 0):
            raise ValueError("grid points must be strictly increasing")
        scale = np.abs(pts).max() + h.max()
        if np.abs(np.diff(pts) - h).max() > 64 * np.finfo(float).eps * scale:
            raise ValueError("steps inconsistent with points")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "steps", h)

    @property
    def N(self) -> int:
        return self.steps.size

    @property
    def x0(self) -> float:
        return float(self.points[0])

    @property
    def X(self) -> float:
        return float(self.points[-1])

    def ratios(self, n: int, rho: int) -> StepRatios:
        """``sigma_n`` for step n (needs n >= rho)."""
        if n < rho:
            raise IndexError(f"step {n} has fewer than {rho} predecessors")
        h = self.steps
        return StepRatios(h[n - rho:n][::-1] / h[n])

    def ratio_matrix(self, rho: int) -> np.ndarray:
        """All ``sigma_n`` for n = rho..N-1 stacked as rows."""
        h = self.steps
        n = np.arange(rho, h.size)
        if rho == 0:
            return np.empty((n.size, 0))
        cols = [h[n - i] / h[n] for i in range(1, rho + 1)]
        return np.column_stack(cols)


@dataclass(frozen=True, eq=False)
class SolutionState:
    """Input vector ``[y_n, y_{n-1}, ..., y_{n-p+1}]`` carried between steps."""

    n: int
    x: float
    blocks: np.ndarray

    def __post_init__(self):
        b = _frozen(np.atleast_2d(self.blocks))
        object.__setattr__(self, "blocks", b)

    @property
    def r(self) -> int:
        return self.blocks.shape[0]

    @property
    def m(self) -> int:
        return self.blocks.shape[1]

    @property
    def y(self) -> np.ndarray:
        return self.blocks[0]


@dataclass(frozen=True)
class ConvergenceRow:
    N: int
    ge: float
    order_estimate: Optional[float] = None

    def __post_init__(self):
        if not self.ge >= 0:
            raise ValueError(f"global error must be nonnegative, got {self.ge}")

    def to_dict(self) -> dict:
        return {"N": self.N, "ge": self.ge, "order_estimate": self.order_estimate}

    @classmethod
    def from_dict(cls, d: dict) -> "ConvergenceRow":
        return cls(int(d["N"]), float(d["ge"]), d.get("order_estimate"))
