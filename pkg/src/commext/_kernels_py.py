"""Pure-Python/numpy reference for the per-rotation objective of the S(Q, Lambda) search.

For a fixed completed orthogonal ``Qt`` and a pair of rows (p, r) the
objective along the rotation angle theta is

    F(theta) = S(Q(theta), Lambda(theta)) + penalty(Qt(theta), Lambda(theta))

with Lambda(theta) re-solved from the normal equations
``sum_b (Q^T Q)_{ab}^2 lambda_b = (Q^T A Q)_{aa}`` at every angle.  The
normal-equation pieces that do not depend on theta are precomputed once per
rotation; the residual itself is summed directly.
"""
from __future__ import annotations

import math

import numpy as np

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class RotationObjective:
    def __init__(self, Qt, A, n, m, p, r):
        Qt = np.asarray(Qt, dtype=float)
        A = np.asarray(A, dtype=float)
        N = Qt.shape[0]
        if not 0 <= p < r < N or p >= n:
            raise ValueError("need p < r and p inside the top block")
        self.N, self.n, self.m, self.p, self.r = N, n, m, p, r
        self.d = A.shape[0]
        self.xp = Qt[p].copy()
        self.xr = Qt[r].copy()
        self.r_top = r < n
        top = [a for a in range(n) if a != p and a != r]
        QT = Qt[top]
        self.P_fix = QT.T @ QT
        AQ = A[:, top][:, :, top] @ QT  # d x |T| x N
        self.rhs_fix = np.einsum("ta,ita->ia", QT, AQ)
        self.h_p = A[:, p, top] @ QT
        self.App = A[:, p, p].copy()
        if self.r_top:
            self.h_r = A[:, r, top] @ QT
            self.Arr = A[:, r, r].copy()
            self.Apr = A[:, p, r].copy()
        self.A = A
        self.Qtop = Qt[:n].copy()

        self.pen = m > 0
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
            self.XE = Qt[E]  # partners of a moving zero-block row
            self.XZ = XZ  # partners of a moving extension column

    def value(self, theta):
        c, s = math.cos(theta), math.sin(theta)
        yp = c * self.xp - s * self.xr
        yr = s * self.xp + c * self.xr
        P = self.P_fix + np.outer(yp, yp)
        rhs = self.rhs_fix + 2.0 * yp * self.h_p + self.App[:, None] * yp * yp
        if self.r_top:
            P += np.outer(yr, yr)
            rhs += 2.0 * yr * self.h_r + self.Arr[:, None] * yr * yr + 2.0 * self.Apr[:, None] * yp * yr
        M = P * P
        try:
            L = np.linalg.cholesky(M)
        except np.linalg.LinAlgError:
            return math.inf
        lam = np.linalg.solve(L.T, np.linalg.solve(L, rhs.T)).T  # d x N
        # residual evaluated directly: the shortcut K - lam.rhs/2 cancels badly once S is small
        Q = self.Qtop
        Q[self.p] = yp
        if self.r_top:
            Q[self.r] = yr
        f = 0.5 * float(np.sum((self.A - np.einsum("ak,ik,bk->iab", Q, lam, Q)) ** 2))
        if self.pen:
            f += float(np.einsum("ia,ab,ib->", lam, self.H, lam))
            if self.p_in_Z:
                f += float(np.sum(((self.XE * yp) @ lam.T) ** 2))
            if self.r_in_Z:
                f += float(np.sum(((self.XE * yr) @ lam.T) ** 2))
            if self.r_in_E:
                f += float(np.sum(((self.XZ * yr) @ lam.T) ** 2))
                if self.p_in_Z:
                    f += float(np.sum(((yp * yr) @ lam.T) ** 2))
        return f

    def minimize(self, span=math.pi / 4, nscan=64, tol=1e-10):
        """Best angle in (-span, span]: grid scan, then golden-section refinement."""
        return scan_golden(self.value, span, nscan, tol)


def scan_golden(f, span=math.pi / 4, nscan=64, tol=1e-10):
    """Return (theta, f(theta), f(0)) minimizing ``f`` on (-span, span]."""
    f0 = f(0.0)
    h = 2.0 * span / nscan
    grid = [-span + h * (k + 1) for k in range(nscan)]
    vals = [f(t) for t in grid]
    k = min(range(nscan), key=vals.__getitem__)
    best_t, best_f = grid[k], vals[k]
    lo, hi = grid[k] - h, min(grid[k] + h, span)
    c = hi - GOLDEN * (hi - lo)
    e = lo + GOLDEN * (hi - lo)
    fc, fe = f(c), f(e)
    while hi - lo > tol:
        if fc < fe:
            hi, e, fe = e, c, fc
            c = hi - GOLDEN * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, e, fe
            e = lo + GOLDEN * (hi - lo)
            fe = f(e)
    for t, v in ((c, fc), (e, fe)):
        if v < best_f:
            best_t, best_f = t, v
    if not best_f < f0:
        return 0.0, f0, f0
    return best_t, best_f, f0
