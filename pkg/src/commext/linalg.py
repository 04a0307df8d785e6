"""Dense real symmetric linear algebra built on Jacobi rotations."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ConvergenceError(RuntimeError):
    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


class NotCommutingError(ValueError):
    def __init__(self, msg, max_commutator=None):
        super().__init__(msg)
        self.max_commutator = max_commutator


class SymMatrix:
    """A finite real symmetric matrix; symmetry is enforced by averaging on construction."""

    __slots__ = ("entries",)

    def __init__(self, entries):
        a = np.array(entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise ValueError(f"SymMatrix needs a non-empty square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("SymMatrix entries must be finite")
        self.entries = 0.5 * (a + a.T)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __repr__(self):
        return f"SymMatrix({self.entries!r})"


def as_array(m) -> np.ndarray:
    return m.entries if isinstance(m, SymMatrix) else np.asarray(m, dtype=float)


def commutator(a, b) -> np.ndarray:
    a, b = as_array(a), as_array(b)
    return a @ b - b @ a


def off_norm(a: np.ndarray) -> float:
    """Frobenius norm of the off-diagonal part."""
    return float(np.linalg.norm(a - np.diag(np.diag(a))))


def fix_signs(vectors: np.ndarray, thresh: float = 1e-8) -> np.ndarray:
    """Flip each column so its first significantly nonzero entry is positive."""
    v = vectors.copy()
    for k in range(v.shape[1]):
        col = v[:, k]
        big = np.nonzero(np.abs(col) > thresh * max(np.abs(col).max(), 1e-300))[0]
        if big.size and col[big[0]] < 0:
            v[:, k] = -col
    return v


def rotate_rows(m: np.ndarray, p: int, r: int, c: float, s: float) -> None:
    """In place: (row_p, row_r) <- (c row_p - s row_r, s row_p + c row_r)."""
    rp = m[p].copy()
    m[p] = c * rp - s * m[r]
    m[r] = s * rp + c * m[r]


def _jacobi_sweeps(a: np.ndarray, v: np.ndarray, target: float, max_sweeps: int) -> int:
    n = a.shape[0]
    for sweep in range(max_sweeps):
        if off_norm(a) <= target:
            return sweep
        # threshold skipping: small entries are left for later sweeps
        thresh = 0.0 if sweep >= 3 else 0.2 * off_norm(a) / (n * n)
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if sweep >= 3 and abs(a[p, p]) + 100.0 * abs(apq) == abs(a[p, p]) \
                        and abs(a[q, q]) + 100.0 * abs(apq) == abs(a[q, q]):
                    a[p, q] = a[q, p] = 0.0
                    continue
                if abs(apq) <= thresh or apq == 0.0:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.hypot(1.0, tau))
                c = 1.0 / np.hypot(1.0, t)
                s = t * c
                # A <- J^T A J with J the rotation in the (p, q) plane
                ap, aq = a[:, p].copy(), a[:, q]
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap, aq = a[p].copy(), a[q]
                a[p] = c * ap - s * aq
                a[q] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q]
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    if off_norm(a) <= target:
        return max_sweeps
    raise ConvergenceError(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps", off_norm(a))


def sym_eigen(A, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(values, vectors)`` with values ascending and ``A = V diag(values) V^T``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = as_array(A).copy()
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    norm = np.linalg.norm(a)
    if norm == 0.0:
        return np.zeros(n), v
    _jacobi_sweeps(a, v, 1e-2 * tol * norm, max_sweeps)
    vals = np.diag(a).copy()
    order = np.argsort(vals, kind="stable")
    return vals[order], fix_signs(v[:, order])


def singular_values(M) -> np.ndarray:
    return np.linalg.svd(np.atleast_2d(as_array(M)), compute_uv=False)


def numerical_rank(M, rel_tol: float = 1e-10) -> int:
    """Number of singular values above ``rel_tol`` times the largest."""
    if not 0.0 < rel_tol < 1.0:
        raise ValueError("rel_tol must lie in (0, 1)")
    s = singular_values(M)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rel_tol * s[0]))


def complete_orthonormal(Q, check_tol: float = 1e-8) -> np.ndarray:
    """Extend an n x N matrix with orthonormal rows to an N x N orthogonal matrix.

    Candidates are the standard basis vectors in index order, orthogonalized
    twice against the rows so far and skipped when nearly dependent.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    n, N = Q.shape
    if n > N:
        raise ValueError("Q must have at least as many columns as rows")
    if np.linalg.norm(Q @ Q.T - np.eye(n)) > check_tol:
        raise ValueError("rows of Q are not orthonormal")
    rows = [row for row in Q]
    # with this threshold some candidate always survives (sum of residuals^2 = N - n)
    keep = 0.5 / np.sqrt(N)
    for j in range(N):
        if len(rows) == N:
            break
        x = np.zeros(N)
        x[j] = 1.0
        B = np.array(rows)
        for _ in range(2):
            x = x - B.T @ (B @ x)
        nx = np.linalg.norm(x)
        if nx > keep:
            rows.append(x / nx)
    out = np.array(rows)
    out[:n] = Q
    return out


@dataclass
class JointEigenSystem:
    """Common eigenvectors (columns of ``vectors``) and the per-matrix eigenvalues."""

    vectors: np.ndarray
    values: np.ndarray  # shape (d, N)
    offdiag_residual: float
    sweeps: int = 0

    @property
    def points(self) -> np.ndarray:
        """Eigenvalue tuples, one row per eigenvector."""
        return self.values.T


def _joint_sweeps(B: np.ndarray, V: np.ndarray, target: float, max_sweeps: int, thresh: float = 1e-15) -> int:
    # Jacobi rotations with the closed-form angle for real symmetric joint diagonalization
    d, N, _ = B.shape
    for sweep in range(max_sweeps):
        if sum(off_norm(b) for b in B) <= target:
            return sweep
        rotated = False
        for p in range(N - 1):
            for q in range(p + 1, N):
                g1 = B[:, p, p] - B[:, q, q]
                g2 = B[:, p, q] + B[:, q, p]
                ton = g1 @ g1 - g2 @ g2
                toff = 2.0 * (g1 @ g2)
                theta = 0.5 * np.arctan2(toff, ton + np.hypot(ton, toff))
                c, s = np.cos(theta), np.sin(theta)
                if abs(s) <= thresh:
                    continue
                rotated = True
                bp, bq = B[:, :, p].copy(), B[:, :, q]
                B[:, :, p] = c * bp + s * bq
                B[:, :, q] = -s * bp + c * bq
                bp, bq = B[:, p, :].copy(), B[:, q, :]
                B[:, p, :] = c * bp + s * bq
                B[:, q, :] = -s * bp + c * bq
                vp, vq = V[:, p].copy(), V[:, q]
                V[:, p] = c * vp + s * vq
                V[:, q] = -s * vp + c * vq
        if not rotated:
            return sweep + 1
    return max_sweeps


def simultaneous_diagonalize(mats, tol: float = 1e-12, commute_tol: float | None = None, max_sweeps: int = 100):
    """Common orthonormal eigenbasis of a commuting family of symmetric matrices.

    A generic linear combination is diagonalized first; joint Jacobi sweeps
    then resolve whatever degeneracy that combination still has.
    """
    arrs = [0.5 * (as_array(m) + as_array(m).T) for m in mats]
    if not arrs:
        raise ValueError("need at least one matrix")
    N = arrs[0].shape[0]
    if any(a.shape != (N, N) for a in arrs):
        raise ValueError("matrices must share one dimension")
    norms = [np.linalg.norm(a) for a in arrs]
    scale = max(norms)
    if commute_tol is None:
        commute_tol = 1e-8 * max(scale, 1.0) ** 2
    worst = 0.0
    for i in range(len(arrs)):
        for j in range(i + 1, len(arrs)):
            worst = max(worst, float(np.linalg.norm(commutator(arrs[i], arrs[j]))))
    if worst > commute_tol:
        raise NotCommutingError(f"not commuting: max commutator norm {worst:.3e}", worst)
    if scale == 0.0:
        return JointEigenSystem(np.eye(N), np.zeros((len(arrs), N)), 0.0)

    weights = [np.sqrt(2.0) ** (-k) * (1.0 + 0.1 * np.pi * k) for k in range(len(arrs))]
    combo = sum(w * a / nrm for w, a, nrm in zip(weights, arrs, norms) if nrm > 0)
    _, V = sym_eigen(combo, tol=1e-14)
    B = np.array([V.T @ a @ V for a in arrs])
    target = tol * sum(norms)
    sweeps = _joint_sweeps(B, V, 0.1 * target, max_sweeps)
    resid_sum = sum(off_norm(b) for b in B)
    if resid_sum > target:
        raise ConvergenceError(f"simultaneous diagonalization stalled at off-diagonal {resid_sum:.3e}", resid_sum)
    vals = np.array([np.diag(b) for b in B])
    order = np.lexsort(vals[::-1])
    V = fix_signs(V[:, order])
    vals = vals[:, order]
    resid = max(off_norm(b) for b in B)
    return JointEigenSystem(V, vals, resid, sweeps)
