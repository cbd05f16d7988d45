# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stepping loop for the built-in right-hand sides.

Mirrors :func:`vssdimsim._fallback.march_builtin`; the whole march runs
without the GIL.
"""
import numpy as np

from libc.math cimport isfinite

from .core import NonFiniteStage

DEF LINEAR = 0
DEF BRUSS = 1
DEF BRUSS_PDE = 2


cdef void _lap(const double* w, double bc, int N, double* out) noexcept nogil:
    cdef int i
    for i in range(N):
        out[i] = -2.0 * w[i]
        if i > 0:
            out[i] += w[i - 1]
        else:
            out[i] += bc
        if i < N - 1:
            out[i] += w[i + 1]
        else:
            out[i] += bc


cdef void _eval_fg(int kind, const double[::1] prm, int m, const double* y,
                   double* F, double* G, double* work) noexcept nogil:
    cdef int i, j, N
    cdef double acc, acc2, w, y1, y2, A, B, k, uu, uv2
    if kind == LINEAR:
        for i in range(m):
            acc = 0.0
            acc2 = 0.0
            for j in range(m):
                acc = acc + prm[i * m + j] * y[j]
                acc2 = acc2 + prm[m * m + i * m + j] * y[j]
            F[i] = acc
            G[i] = acc2
    elif kind == BRUSS:
        y1 = y[0]
        y2 = y[1]
        w = y1 * y1 * y2
        F[0] = 1.0 + w - 4.0 * y1
        F[1] = 3.0 * y1 - w
        G[0] = (2.0 * y1 * y2 - 4.0) * F[0] + y1 * y1 * F[1]
        G[1] = (3.0 - 2.0 * y1 * y2) * F[0] - y1 * y1 * F[1]
    else:
        N = m // 2
        A = prm[1]
        B = prm[2]
        k = prm[3]
        # work holds two laplacians of length N
        _lap(y, A, N, work)
        _lap(y + N, B, N, work + N)
        for i in range(N):
            w = y[i] * y[i] * y[N + i]
            F[i] = A + w - (B + 1.0) * y[i] + k * work[i]
            F[N + i] = B * y[i] - w + k * work[N + i]
        _lap(F, 0.0, N, work)
        _lap(F + N, 0.0, N, work + N)
        for i in range(N):
            uu = y[i] * y[i]
            uv2 = 2.0 * y[i] * y[N + i]
            G[i] = (uv2 - (B + 1.0)) * F[i] + uu * F[N + i] + k * work[i]
            G[N + i] = (B - uv2) * F[i] - uu * F[N + i] + k * work[N + i]


cdef int _march(int kind, const double[::1] prm,
                const double[:, :, ::1] A, const double[:, :, ::1] Abar,
                const double[:, :, ::1] U, const double[:, :, ::1] B,
                const double[:, :, ::1] Bbar, const double[:, :, ::1] V,
                const double[::1] h, double[:, ::1] y, double[:, ::1] ynew,
                double[:, ::1] Y, double[:, ::1] F, double[:, ::1] G,
                double[::1] work, int* bad_step, int* bad_stage) noexcept nogil:
    cdef Py_ssize_t nsteps = h.shape[0]
    cdef int s = A.shape[1]
    cdef int r = U.shape[2]
    cdef int m = y.shape[1]
    cdef Py_ssize_t n
    cdef int i, j, k
    cdef double hn, hh, a, ab, acc
    for n in range(nsteps):
        hn = h[n]
        hh = hn * hn
        for i in range(s):
            for k in range(m):
                acc = 0.0
                for j in range(r):
                    acc = acc + U[n, i, j] * y[j, k]
                for j in range(i):
                    acc = acc + hn * A[n, i, j] * F[j, k] + hh * Abar[n, i, j] * G[j, k]
                Y[i, k] = acc
            _eval_fg(kind, prm, m, &Y[i, 0], &F[i, 0], &G[i, 0], &work[0])
            for k in range(m):
                if not (isfinite(F[i, k]) and isfinite(G[i, k])):
                    bad_step[0] = <int>n
                    bad_stage[0] = i
                    return -1
        for i in range(r):
            for k in range(m):
                acc = 0.0
                for j in range(s):
                    acc = acc + hn * B[n, i, j] * F[j, k] + hh * Bbar[n, i, j] * G[j, k]
                for j in range(r):
                    acc = acc + V[n, i, j] * y[j, k]
                ynew[i, k] = acc
        for i in range(r):
            for k in range(m):
                y[i, k] = ynew[i, k]
    return 0


def march_builtin(int kind, params, A, Abar, U, B, Bbar, V, h, blocks):
    """Advance ``blocks`` (r x m) through ``len(h)`` steps for a built-in kernel.

    Returns the final blocks and the number of f (equal to g) evaluations.
    """
    if kind not in (LINEAR, BRUSS, BRUSS_PDE):
        raise ValueError(f"unknown kernel kind {kind}")
    cdef const double[::1] prm = np.ascontiguousarray(params, dtype=np.float64).reshape(-1)
    cdef const double[:, :, ::1] cA = np.ascontiguousarray(A, dtype=np.float64)
    cdef const double[:, :, ::1] cAb = np.ascontiguousarray(Abar, dtype=np.float64)
    cdef const double[:, :, ::1] cU = np.ascontiguousarray(U, dtype=np.float64)
    cdef const double[:, :, ::1] cB = np.ascontiguousarray(B, dtype=np.float64)
    cdef const double[:, :, ::1] cBb = np.ascontiguousarray(Bbar, dtype=np.float64)
    cdef const double[:, :, ::1] cV = np.ascontiguousarray(V, dtype=np.float64)
    cdef const double[::1] ch = np.ascontiguousarray(h, dtype=np.float64).reshape(-1)
    y_arr = np.array(blocks, dtype=np.float64, order="C")
    cdef double[:, ::1] y = y_arr
    cdef int r = y.shape[0]
    cdef int m = y.shape[1]
    cdef int s = cA.shape[1]
    cdef Py_ssize_t n = ch.shape[0]
    for name, arr in (("A", cA), ("Abar", cAb), ("U", cU), ("B", cB), ("Bbar", cBb), ("V", cV)):
        if arr.shape[0] != n:
            raise ValueError(f"{name} stack has {arr.shape[0]} slices for {n} steps")
    if cU.shape[1] != s or cU.shape[2] != r or cB.shape[1] != r or cB.shape[2] != s \
            or cV.shape[1] != r or cV.shape[2] != r or cAb.shape[1] != s:
        raise ValueError("coefficient shapes do not match the input blocks")
    if kind == LINEAR and prm.shape[0] < 2 * m * m:
        raise ValueError("linear kernel needs M and M^2")
    if kind == BRUSS and m != 2:
        raise ValueError("Brusselator kernel needs m = 2")
    if kind == BRUSS_PDE and (prm.shape[0] < 4 or m != 2 * <int>prm[0]):
        raise ValueError("PDE kernel parameters do not match the state size")
    cdef double[:, ::1] ynew = np.empty((r, m))
    cdef double[:, ::1] Y = np.empty((max(s, 1), m))
    cdef double[:, ::1] F = np.empty((max(s, 1), m))
    cdef double[:, ::1] G = np.empty((max(s, 1), m))
    cdef double[::1] work = np.empty(max(m, 2))
    cdef int bad_step = -1, bad_stage = -1
    cdef int status
    with nogil:
        status = _march(kind, prm, cA, cAb, cU, cB, cBb, cV, ch, y, ynew, Y, F, G,
                        work, &bad_step, &bad_stage)
    if status != 0:
        raise NonFiniteStage(bad_step, bad_stage)
    return y_arr, n * s
