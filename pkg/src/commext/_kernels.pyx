# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-rotation objective for the S(Q, Lambda) search.

Same contract as ``commext._kernels_py.RotationObjective``; precomputation is
done with numpy, evaluation along the angle runs in C.
"""
import math

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, sqrt, INFINITY

cnp.import_array()

cdef double GOLDEN = (sqrt(5.0) - 1.0) / 2.0


cdef class RotationObjective:
    cdef public int N, n, m, p, r, d
    cdef bint r_top, pen, p_in_Z, r_in_Z, r_in_E
    cdef double[::1] xp, xr, App, Arr, Apr
    cdef double[:, ::1] P_fix, rhs_fix, h_p, h_r, H, XE, XZ
    # work space
    cdef double[::1] yp, yr, tmp
    cdef double[:, ::1] M, rhs, lam, Qw
    cdef double[:, :, ::1] A

    def __init__(self, Qt, A, int n, int m, int p, int r):
        Qt = np.ascontiguousarray(Qt, dtype=float)
        A = np.ascontiguousarray(A, dtype=float)
        cdef int N = Qt.shape[0]
        if not (0 <= p < r < N) or p >= n:
            raise ValueError("need p < r and p inside the top block")
        self.N, self.n, self.m, self.p, self.r = N, n, m, p, r
        self.d = A.shape[0]
        self.xp = Qt[p].copy()
        self.xr = Qt[r].copy()
        self.r_top = r < n
        top = [a for a in range(n) if a != p and a != r]
        QT = Qt[top]
        self.P_fix = np.ascontiguousarray(QT.T @ QT)
        AQ = A[:, top][:, :, top] @ QT
        self.rhs_fix = np.ascontiguousarray(np.einsum("ta,ita->ia", QT, AQ))
        self.h_p = np.ascontiguousarray(A[:, p, top] @ QT)
        self.App = np.ascontiguousarray(A[:, p, p])
        if self.r_top:
            self.h_r = np.ascontiguousarray(A[:, r, top] @ QT)
            self.Arr = np.ascontiguousarray(A[:, r, r])
            self.Apr = np.ascontiguousarray(A[:, p, r])
        self.A = A
        self.Qw = Qt[:n].copy()
        self.pen = m > 0
        self.p_in_Z = self.r_in_Z = self.r_in_E = False
        if self.pen:
            Z = [a for a in range(m) if a != p and a != r]
            E = [b for b in range(n, N) if b != r]
            self.p_in_Z = p < m
            self.r_in_Z = r < m
            self.r_in_E = r >= n
            H = np.zeros((N, N))
            XZ = Qt[Z]
            for b in E:
                W = XZ * Qt[b]
                H += W.T @ W
            self.H = H
            self.XE = np.ascontiguousarray(Qt[E]).reshape(len(E), N)
            self.XZ = np.ascontiguousarray(XZ).reshape(len(Z), N)
        self.yp = np.empty(N)
        self.yr = np.empty(N)
        self.tmp = np.empty(N)
        self.M = np.empty((N, N))
        self.rhs = np.empty((self.d, N))
        self.lam = np.empty((self.d, N))

    cdef double _partner_sq(self, double[:, ::1] X, double[::1] y) nogil:
        # sum_i sum_rows ((X_row * y) . lam_i)^2
        cdef int i, b, a, N = self.N
        cdef double acc = 0.0, t
        for i in range(self.d):
            for b in range(X.shape[0]):
                t = 0.0
                for a in range(N):
                    t += X[b, a] * y[a] * self.lam[i, a]
                acc += t * t
        return acc

    cdef double _value(self, double theta) nogil:
        cdef int N = self.N, d = self.d
        cdef int a, b, i, k
        cdef double c = cos(theta), s = sin(theta)
        cdef double v, f, t
        for a in range(N):
            self.yp[a] = c * self.xp[a] - s * self.xr[a]
            self.yr[a] = s * self.xp[a] + c * self.xr[a]
        for a in range(N):
            for b in range(a + 1):
                v = self.P_fix[a, b] + self.yp[a] * self.yp[b]
                if self.r_top:
                    v += self.yr[a] * self.yr[b]
                self.M[a, b] = v * v
        for i in range(d):
            for a in range(N):
                v = self.rhs_fix[i, a] + 2.0 * self.yp[a] * self.h_p[i, a] + self.App[i] * self.yp[a] * self.yp[a]
                if self.r_top:
                    v += 2.0 * self.yr[a] * self.h_r[i, a] + self.Arr[i] * self.yr[a] * self.yr[a] \
                        + 2.0 * self.Apr[i] * self.yp[a] * self.yr[a]
                self.rhs[i, a] = v
        # Cholesky of the lower triangle, in place
        for k in range(N):
            v = self.M[k, k]
            for a in range(k):
                v -= self.M[k, a] * self.M[k, a]
            if not v > 0.0:
                return INFINITY
            v = sqrt(v)
            self.M[k, k] = v
            for a in range(k + 1, N):
                t = self.M[a, k]
                for b in range(k):
                    t -= self.M[a, b] * self.M[k, b]
                self.M[a, k] = t / v
        for i in range(d):
            for a in range(N):
                t = self.rhs[i, a]
                for b in range(a):
                    t -= self.M[a, b] * self.tmp[b]
                self.tmp[a] = t / self.M[a, a]
            for a in range(N - 1, -1, -1):
                t = self.tmp[a]
                for b in range(a + 1, N):
                    t -= self.M[b, a] * self.lam[i, b]
                self.lam[i, a] = t / self.M[a, a]
        # residual summed directly: K - lam.rhs/2 cancels badly once S is small
        for a in range(N):
            self.Qw[self.p, a] = self.yp[a]
            if self.r_top:
                self.Qw[self.r, a] = self.yr[a]
        f = 0.0
        for i in range(d):
            for a in range(self.n):
                for b in range(a + 1):
                    t = self.A[i, a, b]
                    for k in range(N):
                        t -= self.Qw[a, k] * self.lam[i, k] * self.Qw[b, k]
                    f += t * t if a == b else 2.0 * t * t
        f *= 0.5
        if self.pen:
            for i in range(d):
                for a in range(N):
                    t = 0.0
                    for b in range(N):
                        t += self.H[a, b] * self.lam[i, b]
                    f += self.lam[i, a] * t
            if self.p_in_Z:
                f += self._partner_sq(self.XE, self.yp)
            if self.r_in_Z:
                f += self._partner_sq(self.XE, self.yr)
            if self.r_in_E:
                f += self._partner_sq(self.XZ, self.yr)
                if self.p_in_Z:
                    for i in range(d):
                        t = 0.0
                        for a in range(N):
                            t += self.yp[a] * self.yr[a] * self.lam[i, a]
                        f += t * t
        return f

    def value(self, double theta):
        return self._value(theta)

    def minimize(self, double span=math.pi / 4, int nscan=64, double tol=1e-10):
        """Best angle in (-span, span]: grid scan, then golden-section refinement."""
        cdef double f0, h, t, v, best_t, best_f, lo, hi, c, e, fc, fe
        cdef int k
        with nogil:
            f0 = self._value(0.0)
            h = 2.0 * span / nscan
            best_t = 0.0
            best_f = INFINITY
            for k in range(nscan):
                t = -span + h * (k + 1)
                v = self._value(t)
                if v < best_f:
                    best_f = v
                    best_t = t
            lo = best_t - h
            hi = best_t + h
            if hi > span:
                hi = span
            c = hi - GOLDEN * (hi - lo)
            e = lo + GOLDEN * (hi - lo)
            fc = self._value(c)
            fe = self._value(e)
            while hi - lo > tol:
                if fc < fe:
                    hi = e
                    e = c
                    fe = fc
                    c = hi - GOLDEN * (hi - lo)
                    fc = self._value(c)
                else:
                    lo = c
                    c = e
                    fc = fe
                    e = lo + GOLDEN * (hi - lo)
                    fe = self._value(e)
            if fc < best_f:
                best_t = c
                best_f = fc
            if fe < best_f:
                best_t = e
                best_f = fe
        if not best_f < f0:
            return 0.0, f0, f0
        return best_t, best_f, f0
