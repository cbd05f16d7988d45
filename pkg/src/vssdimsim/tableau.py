"""The explicit VS SDIMSIMs of orders 1-4 as functions of the step ratios.

Each method is split into *fixed parts* (the free parameters chosen for a
large stability region and small error constant: ``c``, ``Abar``, the
entries of ``A`` off its first column, ``Bbar`` and ``v``) and the
sigma-dependent remainder (first column of ``A``, ``U`` and ``B``), which is
pinned down row by row by the order conditions. :func:`solve_coefficients`
does that solve; the closed forms for orders 2 and 3 are kept
alongside as an independent check.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from fractions import Fraction as Fr
from typing import Callable, Union

import numpy as np

from .core import StepRatios, Tableau
from .orderconds import abscissa_matrix, shift_matrix

ArrayOrFn = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]


def _q(rows) -> np.ndarray:
    """Exact rationals (or strings like '-11/25') rendered to double."""
    return np.array([[float(Fr(x)) for x in row] for row in rows])


class SingularRowSystem(ArithmeticError):
    """Raised when a per-row order-condition system is singular."""


@dataclass(frozen=True, eq=False)
class FixedParts:
    """The sigma-independent (or externally supplied) part of a method.

    ``Abar``, ``A_known`` and ``Bbar`` may be arrays or callables mapping a
    stack of ratio vectors of shape ``(n, rho)`` to arrays of shape
    ``(n, s, s)``; the order-2 method needs this because its ``Bbar``
    depends on sigma.
    """

    p: int
    c: np.ndarray
    Abar: ArrayOrFn
    A_known: ArrayOrFn
    Bbar: ArrayOrFn
    v: np.ndarray

    def resolve(self, name: str, sig: np.ndarray) -> np.ndarray:
        val = getattr(self, name)
        n = sig.shape[0]
        if callable(val):
            return np.asarray(val(sig), dtype=float)
        return np.broadcast_to(np.asarray(val, dtype=float), (n,) + np.shape(val))


# -- fixed parts of the four methods -----------------------------------------

def _order2_bbar(sig: np.ndarray) -> np.ndarray:
    s2 = sig[:, 0] ** 2
    out = np.empty((sig.shape[0], 2, 2))
    out[:, 0, 0] = 1 / 8 + 253 / 6000 * s2
    out[:, 0, 1] = 1 / 8 - 253 / 3600 * s2
    out[:, 1, 0] = -1 / 8 + 3289 / 18000 * s2
    out[:, 1, 1] = -1 / 8 + 253 / 3600 * s2
    return out


FIXED = {
    1: FixedParts(
        p=1, c=np.zeros(1), Abar=np.zeros((1, 1)), A_known=np.zeros((1, 1)),
        Bbar=_q([["499/1000"]]), v=np.ones(1),
    ),
    2: FixedParts(
        p=2, c=np.array([0.0, 1.0]),
        Abar=_q([[0, 0], ["2/5", 0]]),
        A_known=np.zeros((2, 2)),
        Bbar=_order2_bbar,
        v=_q([["4247/4500", "253/4500"]])[0],
    ),
    3: FixedParts(
        p=3, c=_q([[0, "1/2", 1]])[0],
        Abar=_q([[0, 0, 0], ["1/10", 0, 0], ["1/5", "1/2", 0]]),
        A_known=_q([[0, 0, 0], [0, 0, 0], [0, "1/4", 0]]),
        Bbar=_q([["67/500", 0, "13/500"], [0, "-171/500", 0], ["-321/100", 0, "-73/100"]]),
        v=_q([[0, "12072/9889", "-2183/9889"]])[0],
    ),
    4: FixedParts(
        p=4, c=_q([[0, "1/3", "2/3", 1]])[0],
        Abar=_q([[0, 0, 0, 0], ["1/2", 0, 0, 0], [1, "1/4", 0, 0], ["351/125", 0, "42/125", 0]]),
        A_known=_q([[0, 0, 0, 0], [0, 0, 0, 0], [0, "-11/25", 0, 0], [0, "11/10", "-16/25", 0]]),
        Bbar=_q([["6211/25000", "2/25", "-147/6250", 0]] * 4),
        v=_q([["1/2", "1/4", "8/25", "-7/100"]])[0],
    ),
}


# -- batched per-row solver ---------------------------------------------------

def _taylor_stack(p: int, sig: np.ndarray) -> np.ndarray:
    """``T(sigma)`` for every row of ``sig``: shape ``(n, p, p+1)``."""
    n = sig.shape[0]
    cum = np.concatenate([np.zeros((n, 1)), np.cumsum(sig, axis=1)], axis=1)
    inv_fact = abscissa_matrix(np.ones(1), p)[0]
    return (-cum[:, :, None]) ** np.arange(p + 1) * inv_fact


def _check_ratios(sig: np.ndarray, p: int) -> np.ndarray:
    sig = np.asarray(sig, dtype=float)
    if sig.ndim == 1:
        sig = sig[None, :]
    if sig.shape[1] != p - 1:
        raise ValueError(f"order {p} needs {p - 1} step ratios, got {sig.shape[1]}")
    if not np.all(np.isfinite(sig)) or np.any(sig <= 0):
        raise ValueError("step ratios must be positive and finite")
    return sig


def coefficient_stack(fixed: FixedParts, sigmas) -> dict:
    """Solve the order conditions for many ratio vectors at once.

    Returns a dict with arrays ``A, Abar, U, B, Bbar, V`` of leading
    dimension ``n`` (one slice per ratio vector) and the shared ``c``.
    """
    p = fixed.p
    sig = _check_ratios(sigmas, p)
    n = sig.shape[0]
    c = np.asarray(fixed.c, dtype=float)
    C = abscissa_matrix(c, p)
    K = shift_matrix(p)
    CK = C @ K
    CK2 = CK @ K

    Abar = np.array(fixed.resolve("Abar", sig))
    A = np.array(fixed.resolve("A_known", sig))
    Bbar = np.array(fixed.resolve("Bbar", sig))
    V = np.broadcast_to(np.outer(np.ones(p), fixed.v), (n, p, p)).copy()
    T = _taylor_stack(p, sig)

    if p > 1:
        cum = np.cumsum(sig, axis=1)
        if np.any(np.diff(np.concatenate([np.zeros((n, 1)), cum], axis=1), axis=1) <= 0):
            raise SingularRowSystem("cumulative step ratios coincide")

    # stage rows: C_i = a_i1 (CK)_1 + (A_known C K)_i + (Abar C K^2)_i + u_i T
    rhs = C[None, :, :] - A @ CK - Abar @ CK2            # (n, s, p+1)
    U = np.empty((n, p, p))
    # first stage: c_1 = 0 and no A unknown; the first p equations fix u_1
    U[:, 0, :] = np.linalg.solve(np.swapaxes(T[:, :, :p], 1, 2), rhs[:, 0, :p, None])[..., 0]
    if p > 1:
        M = np.empty((n, p + 1, p + 1))
        M[:, :, 0] = CK[0]
        M[:, :, 1:] = np.swapaxes(T, 1, 2)
        sol = np.linalg.solve(M, np.swapaxes(rhs[:, 1:, :], 1, 2))   # (n, p+1, s-1)
        A[:, 1:, 0] = sol[:, 0, :]
        U[:, 1:, :] = np.swapaxes(sol[:, 1:, :], 1, 2)
    first = np.einsum("nj,njk->nk", U[:, 0, :], T)
    if np.abs(first - rhs[:, 0, :]).max() > 1e-12:
        raise SingularRowSystem("first stage row is inconsistent with c_1 = 0")

    # output rows: That - Bbar C K^2 - V T = B C K ; column 0 holds by preconsistency
    E1 = abscissa_matrix(np.ones(1), p)
    That = np.concatenate([np.broadcast_to(E1, (n, 1, p + 1)), T[:, :-1, :]], axis=1)
    orhs = That - Bbar @ CK2 - V @ T
    col0 = np.abs(orhs[:, :, 0]).max()
    if col0 > 1e-12:
        raise SingularRowSystem(f"output column-0 equation violated by {col0:.2e}; "
                                "fixed parts are not preconsistent")
    B = np.linalg.solve(CK[:, 1:].T, np.swapaxes(orhs[:, :, 1:], 1, 2))
    B = np.swapaxes(B, 1, 2)
    return {"c": c, "A": A, "Abar": Abar, "U": U, "B": B, "Bbar": Bbar, "V": V}


def _tableau_at(stack: dict, k: int, p: int, sigma) -> Tableau:
    return Tableau(p=p, c=stack["c"], A=stack["A"][k], Abar=stack["Abar"][k], U=stack["U"][k],
                   B=stack["B"][k], Bbar=stack["Bbar"][k], V=stack["V"][k], sigma=sigma)


def solve_coefficients(fixed: FixedParts, sigma) -> Tableau:
    """Build the tableau at one ratio vector by solving the order conditions."""
    sig = StepRatios.coerce(sigma)
    return _tableau_at(coefficient_stack(fixed, sig.values), 0, fixed.p, sig)


# -- the four methods -----------------------------------------------------------

def order1() -> Tableau:
    """One-stage Taylor-like method ``y + h f + (499/1000) h^2 g``."""
    return Tableau(p=1, c=[0.0], A=[[0.0]], Abar=[[0.0]], U=[[1.0]], B=[[1.0]],
                   Bbar=FIXED[1].Bbar, V=[[1.0]], sigma=StepRatios(np.empty(0)))


def order2_stack(sig: np.ndarray) -> dict:
    """Closed-form order-2 coefficients for a stack of ratios, shape (n, 1)."""
    s = _check_ratios(sig, 2)[:, 0]
    n = s.size
    A = np.zeros((n, 2, 2))
    A[:, 1, 0] = 1 + 1 / (5 * s)
    Abar = np.zeros((n, 2, 2))
    Abar[:, 1, 0] = 2 / 5
    U = np.zeros((n, 2, 2))
    U[:, 0, 0] = 1.0
    U[:, 1, 1] = 1 / (5 * s * s)
    U[:, 1, 0] = 1 - U[:, 1, 1]
    B = np.empty((n, 2, 2))
    B[:, 0, 0] = 3 / 4 + 253 / 4500 * s
    B[:, 0, 1] = 1 / 4
    B[:, 1, 0] = -1 / 4 + 253 / 4500 * s + 253 / 900 * s * s
    B[:, 1, 1] = 1 / 4 - 253 / 900 * s * s
    V = np.broadcast_to(np.outer(np.ones(2), FIXED[2].v), (n, 2, 2)).copy()
    return {"c": FIXED[2].c, "A": A, "Abar": Abar, "U": U, "B": B,
            "Bbar": _order2_bbar(s[:, None]), "V": V}


def order2(sigma) -> Tableau:
    sig = StepRatios.coerce(sigma)
    if len(sig) != 1:
        raise ValueError("order 2 takes a single step ratio")
    return _tableau_at(order2_stack(sig.values[None, :]), 0, 2, sig)


def order3(sigma) -> Tableau:
    return solve_coefficients(FIXED[3], sigma)


def order4(sigma) -> Tableau:
    return solve_coefficients(FIXED[4], sigma)


def method(p: int, sigma=None) -> Tableau:
    """Tableau of the order-p method at ``sigma`` (all ones when omitted)."""
    if p not in FIXED:
        raise ValueError(f"no method of order {p}; choose 1-4")
    if sigma is None:
        sigma = np.ones(p - 1)
    if p == 1:
        if len(np.atleast_1d(sigma)):
            raise ValueError("order 1 takes no step ratios")
        return order1()
    return {2: order2, 3: order3, 4: order4}[p](sigma)


def method_stack(p: int, sigmas) -> dict:
    """Coefficient arrays of the order-p method for every row of ``sigmas``."""
    if p == 1:
        n = np.asarray(sigmas).shape[0]
        t = order1()
        return {k: (getattr(t, k) if k == "c" else np.broadcast_to(getattr(t, k), (n, 1, 1)))
                for k in ("c", "A", "Abar", "U", "B", "Bbar", "V")}
    if p == 2:
        return order2_stack(sigmas)
    return coefficient_stack(FIXED[p], sigmas)


class TableauCache:
    """Opt-in memo of tableaus keyed on sigma rounded to 12 significant digits.

    Safe for concurrent use from several threads.
    """

    def __init__(self, p: int):
        self.p = p
        self._store: dict = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def __call__(self, sigma) -> Tableau:
        sig = StepRatios.coerce(sigma if sigma is not None else np.ones(self.p - 1))
        key = tuple(float(f"{x:.12g}") for x in sig.values)
        with self._lock:
            t = self._store.get(key)
            if t is not None:
                self.hits += 1
                return t
        t = method(self.p, sig)
        with self._lock:
            self.misses += 1
            self._store.setdefault(key, t)
        return t


# -- closed forms, kept as an independent oracle ----------------------

def order3_closed(sigma) -> dict:
    """Closed-form ``A``, ``U`` and ``B`` of the order-3 method."""
    s1, s2 = StepRatios.coerce(sigma).values
    S = s1 + s2
    A = np.zeros((3, 3))
    A[1, 0] = (5 + 2 * s2 + 20 * s1 * s2 + 20 * s1**2 + 4 * s1) / (40 * s1 * S)
    A[2, 0] = (-55 - 52 * s2 + 60 * s1 * s2 + 60 * s1**2 - 104 * s1) / (80 * s1 * S)
    A[2, 1] = 1 / 4
    U = np.zeros((3, 3))
    U[0, 0] = 1.0
    U[1, 0] = (-6 * s1 * s2 - 5 * s2 - 10 * s1 - 6 * s1**2 - 2 * s2**2 + 40 * s1**2 * s2**2
               + 80 * s1**3 * s2 + 40 * s1**4) / (40 * s1**2 * S**2)
    U[1, 1] = (5 + 2 * S) / (40 * s1**2 * s2)
    U[1, 2] = -(5 + 2 * s1) / (40 * s2 * S**2)
    U[2, 0] = (156 * s1 * s2 + 55 * s2 + 110 * s1 + 156 * s1**2 + 52 * s2**2 + 80 * s1**2 * s2**2
               + 160 * s1**3 * s2 + 80 * s1**4) / (80 * s1**2 * S**2)
    U[2, 1] = -(55 + 52 * S) / (80 * s1**2 * s2)
    U[2, 2] = (55 + 52 * s1) / (80 * s2 * S**2)

    k1, k2, k3 = 2183 / 9889, 4366 / 9889, 6549 / 9889
    k4, k5 = 4366 / 29667, 6549 / 19778
    k6, k7, k8 = 8732 / 9889, 8732 / 29667, 2183 / 19778
    # the sigma-dependent tails shared by the three rows of each column of B
    t1 = -k1 * s2 - k3 * s1 * s2 - k4 * s2**3 - k2 * s1 * s2**2 - k2 * s1**2 * s2 - k5 * s2**2
    t2 = k6 * s1 * s2**2 + k6 * s1 * s2 + k2 * s2**2 + k6 * s1**2 * s2 + k7 * s2**3
    t3 = -k2 * s1 * s2**2 - k1 * s1 * s2 - k8 * s2**2 - k2 * s1**2 * s2 - k4 * s2**3
    B = np.empty((3, 3))
    B[0, 0] = 407 / 750 + s1 + 1.5 * s1**2 + 2 / 3 * s1**3 + t1
    B[0, 1] = 88 / 375 - 4 / 3 * s1**3 - 2 * s1**2 + t2
    B[0, 2] = 167 / 750 + 2 / 3 * s1**3 + 0.5 * s1**2 + t3
    B[1, 0] = -171 / 500 + s1 + 1.5 * s1**2 + 2 / 3 * s1**3 + t1
    B[1, 1] = -4 / 3 * s1**3 - 2 * s1**2 + t2
    B[1, 2] = 171 / 500 + 2 / 3 * s1**3 + 0.5 * s1**2 + t3
    B[2, 0] = -89 / 10 + t1
    B[2, 1] = 248 / 25 + t2
    B[2, 2] = -51 / 50 + t3
    return {"A": A, "U": U, "B": B}


def order4_closed_partial(sigma) -> dict:
    """The shorter order-4 closed forms: first column of ``A`` and columns 2-4 of ``U``.

    Entries that are not reproduced here are left as NaN.
    """
    s1, s2, s3 = StepRatios.coerce(sigma).values
    D = s1 * (s1 + s2) * (s1 + s2 + s3)
    A = np.full((4, 4), np.nan)
    A[1, 0] = (-72 * s2**2 + 27 * s1 * s2**2 - 72 * s2 * s3 + 6 * s2 + 54 * s1**2 * s2
               + 27 * s1 * s2 * s3 - 288 * s1 * s2 - 216 * s1**2 + 27 * s1**3 + 3 * s3
               - 144 * s1 * s3 + 27 * s1**2 * s3 + 9 * s1 + 1) / (81 * D)
    A[2, 0] = (-7137 * s2**2 + 4482 * s1 * s2**2 - 7137 * s2 * s3 - 462 * s2 + 8964 * s1**2 * s2
               + 4482 * s1 * s2 * s3 - 28548 * s1 * s2 - 21411 * s1**2 + 4482 * s1**3 - 231 * s3
               - 14274 * s1 * s3 + 4482 * s1**2 * s3 - 693 * s1 - 286) / (4050 * D)
    A[3, 0] = (1215 * s1 * s2**2 - 11628 * s2**2 + 1215 * s1 * s2 * s3 + 642 * s2 + 2430 * s1**2 * s2
               - 11628 * s2 * s3 - 46512 * s1 * s2 - 34884 * s1**2 + 1215 * s1**3 + 321 * s3
               + 1215 * s1**2 * s3 - 23256 * s1 * s3 + 963 * s1 - 442) / (2250 * D)

    U = np.full((4, 4), np.nan)
    U[0] = [1.0, 0.0, 0.0, 0.0]
    # rows 2-4 share one pattern with constants (k, a, b, d): numerators
    #   u_i2 ~ k(s2 s3 + s1 s3 + s2^2 + 2 s1 s2 + s1^2) + a s3 + 2a s2 + 2a s1 + d
    for i, (den, k, a, d) in enumerate([(81, 72, -3, -1), (4050, 7137, 231, 286),
                                        (2250, 11628, -321, 442)], start=1):
        U[i, 1] = -(k * s2 * s3 + a * s3 + k * s1 * s3 + k * s2**2 + 2 * a * s2 + 2 * k * s1 * s2
                    + 2 * a * s1 + d + k * s1**2) / (den * (s2 + s3) * s1**2 * s2)
        U[i, 2] = (a * s3 + k * s1 * s3 + k * s1 * s2 + a * s2 + 2 * a * s1 + d
                   + k * s1**2) / (den * (s1 + s2) ** 2 * s2 * s3)
        U[i, 3] = -(k * s1 * s2 + a * s2 + 2 * a * s1 + d + k * s1**2) / (
            den * s3 * (s2 + s3) * (s1 + s2 + s3) ** 2)
    return {"A": A, "U": U}
