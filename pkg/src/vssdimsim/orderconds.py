"""Order-condition matrices, residuals, error constants and stability objects.

With ``beta`` the ``r x (rho+1)`` matrix that expresses the input vector as
``y[n] ~ sum_l beta_l y(x_{n-l})``, a method has order p and stage order p
exactly when both of

    C = A C K + Abar C K^2 + U beta T(sigma)
    beta That(sigma) = B C K + Bbar C K^2 + V beta T(sigma)

hold. ``beta`` defaults to the identity, which is the class constructed in
:mod:`vssdimsim.tableau`.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import factorial
from typing import Callable, Iterable, Optional

import numpy as np

from .core import StepRatios, Tableau

#: residual tolerance per order; conditioning of the per-row systems grows with p
TIER_TOL = {1: 1e-13, 2: 1e-13, 3: 1e-11, 4: 1e-10}


@dataclass(frozen=True, eq=False)
class TaylorMatrices:
    T: np.ndarray
    That: np.ndarray
    Cmat: np.ndarray
    K: np.ndarray
    E: np.ndarray


def _inv_factorials(n: int) -> np.ndarray:
    return np.array([1.0 / factorial(j) for j in range(n)])


def shift_matrix(p: int) -> np.ndarray:
    """``K = [0 e_1 ... e_p]``, the nilpotent upper shift of size p+1."""
    return np.eye(p + 1, k=1)


def exp_shift(p: int) -> np.ndarray:
    """``exp(K)``: entries ``1/(j-i)!`` on and above the diagonal."""
    i, j = np.indices((p + 1, p + 1))
    E = np.zeros((p + 1, p + 1))
    up = j >= i
    E[up] = [1.0 / factorial(k) for k in (j - i)[up]]
    return E


def taylor_rows(p: int, sigma, power: Optional[int] = None) -> np.ndarray:
    """``T(sigma)``: row l holds ``(-S_l)^j / j!`` with ``S_l`` the l-th cumulative ratio.

    With ``power`` given, returns only that column (length rho+1).
    """
    cum = StepRatios.coerce(sigma).cumulative
    if power is not None:
        return (-cum) ** power / factorial(power)
    j = np.arange(p + 1)
    return (-cum[:, None]) ** j * _inv_factorials(p + 1)


def abscissa_matrix(c, p: int, power: Optional[int] = None) -> np.ndarray:
    """``C = [e, c, c^2/2!, ..., c^p/p!]`` (or a single column with ``power``)."""
    c = np.asarray(c, dtype=float)
    if power is not None:
        if power < 0:
            return np.zeros_like(c)
        return c ** power / factorial(power)
    j = np.arange(p + 1)
    return c[:, None] ** j * _inv_factorials(p + 1)


def taylor_matrices(p: int, sigma, c) -> TaylorMatrices:
    sig = StepRatios.coerce(sigma).values
    c = np.asarray(c, dtype=float).reshape(-1)
    if p < 1:
        raise ValueError("order must be >= 1")
    if sig.size != p - 1:
        raise ValueError(f"need rho = p - 1 = {p - 1} ratios, got {sig.size}")
    if c.size != p:
        raise ValueError(f"need s = p = {p} abscissae, got {c.size}")
    T = taylor_rows(p, sig)
    E1 = _inv_factorials(p + 1)
    That = np.vstack([E1, T[:-1]])
    return TaylorMatrices(T=T, That=That, Cmat=abscissa_matrix(c, p),
                          K=shift_matrix(p), E=exp_shift(p))


def _beta(t: Tableau, beta) -> np.ndarray:
    if beta is None:
        return np.eye(t.r, t.rho + 1)
    return np.asarray(beta, dtype=float)


def stage_residual(t: Tableau, beta=None) -> np.ndarray:
    """``C - A C K - Abar C K^2 - U beta T``; column mu is ``C_mu(sigma)``."""
    tm = taylor_matrices(t.p, t.sigma.values, t.c)
    CK = tm.Cmat @ tm.K
    return tm.Cmat - t.A @ CK - t.Abar @ CK @ tm.K - t.U @ _beta(t, beta) @ tm.T


def output_residual(t: Tableau, beta=None) -> np.ndarray:
    """``beta That - B C K - Bbar C K^2 - V beta T``; column mu is ``Chat_mu(sigma)``."""
    b = _beta(t, beta)
    tm = taylor_matrices(t.p, t.sigma.values, t.c)
    CK = tm.Cmat @ tm.K
    return b @ tm.That - t.B @ CK - t.Bbar @ CK @ tm.K - t.V @ b @ tm.T


def max_residuals(t: Tableau) -> tuple[float, float]:
    return float(np.abs(stage_residual(t)).max()), float(np.abs(output_residual(t)).max())


def error_constant(t: Tableau, beta=None) -> np.ndarray:
    """Leading local-truncation-error vector ``phi_p(sigma)``.

    ``lte = phi_p h^{p+1} y^{(p+1)}(x_n) + O(h^{p+2})`` holds componentwise for the
    output vector, provided the order conditions are satisfied.
    """
    p = t.p
    b = _beta(t, beta)
    Tp1 = taylor_rows(p, t.sigma.values, power=p + 1)
    That_p1 = np.concatenate(([1.0 / factorial(p + 1)], Tp1[:-1]))
    return (b @ That_p1 - t.B @ abscissa_matrix(t.c, p, p)
            - t.Bbar @ abscissa_matrix(t.c, p, p - 1) - t.V @ b @ Tp1)


def method_error_constant(t: Tableau, beta=None) -> float:
    """Scalar error constant ``v^T phi_p``.

    Only the ``v``-weighted combination of the local errors survives
    propagation through the rank-one ``V``; this is the quantity the methods'
    free parameters were tuned against (1e-3 for p <= 3).
    """
    return float(t.v @ error_constant(t, beta))


def propagation_matrix(t: Tableau, z: complex) -> np.ndarray:
    """``M(z) = V + (z B + z^2 Bbar)(I - z A - z^2 Abar)^{-1} U``."""
    s = t.s
    lhs = np.eye(s) - z * t.A - z * z * t.Abar
    # unit lower triangular for explicit methods
    X = np.linalg.solve(lhs.astype(complex), t.U.astype(complex))
    return t.V + (z * t.B + z * z * t.Bbar) @ X


def stability_polynomial_coeffs(t: Tableau, z: complex) -> np.ndarray:
    """Coefficients of ``det(w I - M(z))`` in descending powers of w."""
    return np.poly(propagation_matrix(t, z))


@dataclass
class ZeroStabilityReport:
    norm: float
    expected_norm: float
    max_deviation: float
    n_factors: int
    product: np.ndarray

    @property
    def ok(self) -> bool:
        return self.max_deviation <= 1e-12


def zero_stability_product(factory: Callable[[object], Tableau],
                           sigmas: Iterable) -> ZeroStabilityReport:
    """Multiply ``V(sigma_1) V(sigma_2) ...`` left to right.

    Each factor is ``e v^T`` with ``v^T e = 1``, so the product should be the
    rank-one ``e v_last^T`` of the last factor applied.
    """
    P = None
    last = None
    count = 0
    for sig in sigmas:
        t = factory(sig)
        P = t.V.copy() if P is None else P @ t.V
        last = t
        count += 1
    if P is None:
        raise ValueError("need at least one ratio vector")
    expected = np.outer(np.ones(last.r), last.v)
    return ZeroStabilityReport(
        norm=float(np.abs(P).sum(axis=1).max()),
        expected_norm=float(np.abs(expected).sum(axis=1).max()),
        max_deviation=float(np.abs(P - expected).max()),
        n_factors=count,
        product=P,
    )


def fixed_stepsize_check(t: Tableau, beta=None) -> tuple[float, float]:
    """Residual max-norms of the uniform-grid conditions

        C = A C K + Abar C K^2 + U W,   W E = B C K + Bbar C K^2 + V W

    with ``W = beta T(e)`` rebuilt from beta (row l of ``T(e)`` is ``(-l)^j / j!``).
    """
    p = t.p
    if not np.allclose(t.sigma.values, 1.0, rtol=0, atol=0):
        raise ValueError("fixed-stepsize check needs sigma = e")
    b = _beta(t, beta)
    W = b @ taylor_rows(p, np.ones(p - 1))
    C = abscissa_matrix(t.c, p)
    K = shift_matrix(p)
    E = exp_shift(p)
    CK = C @ K
    r1 = C - t.A @ CK - t.Abar @ CK @ K - t.U @ W
    r2 = W @ E - t.B @ CK - t.Bbar @ CK @ K - t.V @ W
    return float(np.abs(r1).max()), float(np.abs(r2).max())
