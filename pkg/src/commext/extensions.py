"""Commuting extensions of symmetric matrix families.

An extension of ``A_1..A_d`` (each n x n) is a family of N x N matrices that
pairwise commute and carry ``A_i`` as their top-left block.  Two searches are
provided: rotation sweeps on the factorization ``A_i = Q diag(lambda_i) Q^T``
with orthonormal rows ``Q`` (``minimize_s``), and a gradient flow on the free
blocks of a structured extension (``gradient_flow``).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.linalg

from . import _accel
from .linalg import (
    ConvergenceError,
    NotCommutingError,
    SymMatrix,
    as_array,
    commutator,
    complete_orthonormal,
    numerical_rank,
    rotate_rows,
    simultaneous_diagonalize,
    sym_eigen,
)
from .moments import CoordinateMatrices


class SingularLambdaSystem(np.linalg.LinAlgError):
    pass


class CriterionInapplicable(ValueError):
    pass


def _arrays(mats) -> list[np.ndarray]:
    if isinstance(mats, CoordinateMatrices):
        mats = mats.mats
    return [as_array(m) for m in mats]


def problem_scale(mats) -> float:
    """Sum of squared Frobenius norms; quadratic quantities are measured against it."""
    return float(sum(np.sum(a * a) for a in _arrays(mats)))


def _zero_rows(zero_block_spec) -> int:
    if zero_block_spec is None:
        return 0
    m = int(zero_block_spec)
    if m < 0:
        raise ValueError("zero_block_spec must be a non-negative row count")
    return m


def _max_commutator(arrs) -> float:
    worst = 0.0
    for i in range(len(arrs)):
        for j in range(i + 1, len(arrs)):
            worst = max(worst, float(np.linalg.norm(commutator(arrs[i], arrs[j]))))
    return worst


# ---------------------------------------------------------------------------
# candidates


@dataclass
class ExtensionCandidate:
    """A (possibly approximate) commuting extension in factored form.

    ``qfull`` is the completed N x N orthogonal matrix whose first ``n`` rows
    are ``Q``; ``extended[i]`` are the N x N matrices.  ``zero_rows`` is the
    number of leading rows whose coupling to the added columns must vanish.
    """

    n: int
    N: int
    d: int
    Q: np.ndarray
    qfull: np.ndarray
    lambdas: np.ndarray
    extended: list
    objective: float
    compat_penalty: float
    commutator_residual: float
    zero_rows: int = 0
    method: str = ""
    seed: int | None = None
    sweeps: int = 0
    success: bool = False
    history: list = field(default_factory=list, repr=False)
    info: dict = field(default_factory=dict, repr=False)

    @property
    def extended_arrays(self) -> list[np.ndarray]:
        return [m.entries for m in self.extended]

    @classmethod
    def from_factors(cls, mats, qfull, lambdas, zero_rows: int = 0, **kw) -> "ExtensionCandidate":
        arrs = _arrays(mats)
        qfull = np.asarray(qfull, dtype=float)
        lambdas = np.atleast_2d(np.asarray(lambdas, dtype=float))
        n, N = arrs[0].shape[0], qfull.shape[0]
        ext = [(qfull * lam) @ qfull.T for lam in lambdas]
        misfit = 0.5 * sum(float(np.sum((a - e[:n, :n]) ** 2)) for a, e in zip(arrs, ext))
        pen = sum(float(np.sum(e[:zero_rows, n:] ** 2)) for e in ext)
        return cls(
            n, N, len(arrs), qfull[:n].copy(), qfull, lambdas, [SymMatrix(e) for e in ext],
            misfit, pen, _max_commutator(ext), zero_rows, **kw,
        )

    @classmethod
    def from_extended(cls, mats, extended, zero_rows: int = 0, **kw) -> "ExtensionCandidate":
        """Factor given N x N matrices; when they do not commute the factors are approximate."""
        arrs = _arrays(mats)
        ext = [0.5 * (as_array(e) + as_array(e).T) for e in extended]
        n, N = arrs[0].shape[0], ext[0].shape[0]
        try:
            js = simultaneous_diagonalize(ext)
            V = js.vectors
        except (NotCommutingError, ConvergenceError):
            combo = sum(np.sqrt(2.0) ** (-k) * e for k, e in enumerate(ext))
            _, V = np.linalg.eigh(combo)
        lambdas = np.array([np.einsum("ka,kl,la->a", V, e, V) for e in ext])
        refit = [(V * lam) @ V.T for lam in lambdas]
        misfit = 0.5 * sum(float(np.sum((a - r[:n, :n]) ** 2)) for a, r in zip(arrs, refit))
        pen = sum(float(np.sum(e[:zero_rows, n:] ** 2)) for e in ext)
        return cls(
            n, N, len(arrs), V[:n].copy(), V, lambdas, [SymMatrix(e) for e in ext],
            misfit, pen, _max_commutator(ext), zero_rows, **kw,
        )

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "N": self.N,
            "d": self.d,
            "Q": self.Q.tolist(),
            "qfull": self.qfull.tolist(),
            "lambdas": self.lambdas.tolist(),
            "extended": [m.entries.tolist() for m in self.extended],
            "residuals": {
                "objective": self.objective,
                "compat_penalty": self.compat_penalty,
                "commutator": self.commutator_residual,
            },
            "zero_rows": self.zero_rows,
            "method": self.method,
            "seed": self.seed,
            "sweeps": self.sweeps,
            "success": self.success,
        }

    def to_json(self) -> str:
        # json writes floats with repr(), the shortest string that round-trips
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "ExtensionCandidate":
        res = data["residuals"]
        return cls(
            int(data["n"]), int(data["N"]), int(data["d"]),
            np.array(data["Q"], dtype=float), np.array(data["qfull"], dtype=float),
            np.array(data["lambdas"], dtype=float),
            [SymMatrix(e) for e in data["extended"]],
            float(res["objective"]), float(res["compat_penalty"]), float(res["commutator"]),
            int(data.get("zero_rows", 0)), data.get("method", ""), data.get("seed"),
            int(data.get("sweeps", 0)), bool(data.get("success", False)),
        )

    @classmethod
    def from_json(cls, text: str) -> "ExtensionCandidate":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# constructive extension and size bounds


def circulant_extension(mats) -> list[np.ndarray]:
    """Block-circulant commuting extensions of size d*n.

    Block (j, k) of the i-th output is ``A_{(i + k - j) mod d}``.  The inputs
    need not be symmetric and neither are the outputs in general.
    """
    arrs = [np.asarray(m.entries if isinstance(m, SymMatrix) else m, dtype=float) for m in mats]
    d = len(arrs)
    if d == 0:
        raise ValueError("need at least one matrix")
    n = arrs[0].shape[0]
    if any(a.shape != (n, n) for a in arrs):
        raise ValueError("all matrices must be n x n")
    return [np.block([[arrs[(i + k - j) % d] for k in range(d)] for j in range(d)]) for i in range(d)]


def _ceil(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


@dataclass
class BoundReport:
    n: int
    d: int
    max_commutator_rank: int
    rank_bound: int
    param_bound: int
    structured_bound: int | None = None
    dof_bound_2d: int | None = None
    # the parameter-count bounds are estimates, not guarantees
    labels: dict = field(default_factory=lambda: {
        "rank_bound": "rigorous",
        "param_bound": "heuristic",
        "structured_bound": "heuristic",
        "dof_bound_2d": "heuristic",
    })

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "d": self.d,
            "max_commutator_rank": self.max_commutator_rank,
            "rank_bound": self.rank_bound,
            "param_bound": self.param_bound,
            "structured_bound": self.structured_bound,
            "dof_bound_2d": self.dof_bound_2d,
            "labels": dict(self.labels),
        }


def bound_report(mats, block_sizes=None, rel_tol: float = 1e-10) -> BoundReport:
    """Lower bounds and parameter-count estimates for the extension size N."""
    if isinstance(mats, CoordinateMatrices) and block_sizes is None:
        block_sizes = mats.block_sizes
    arrs = _arrays(mats)
    d = len(arrs)
    if d < 1:
        raise ValueError("need d >= 1")
    n = arrs[0].shape[0]
    rank = 0
    for i in range(d):
        for j in range(i + 1, d):
            rank = max(rank, numerical_rank(commutator(arrs[i], arrs[j]), rel_tol))
    rank_bound = n + _ceil(Fraction(rank, 2))
    param_bound = n + max(0, _ceil(Fraction(n * (n - 1) * (d - 1), 2 * (n + d))))

    structured = None
    dof = None
    if block_sizes is not None:
        if sum(block_sizes) != n:
            raise ValueError(f"block sizes {block_sizes} do not add up to n={n}")
        nr = block_sizes[-1]
        prev = block_sizes[-2] if len(block_sizes) > 1 else 0
        if d == 1 or nr <= 1:
            structured = n
        else:
            den = Fraction(nr + d, d - 1) - prev
            if den > 0:
                structured = n + max(0, _ceil(Fraction(nr * (nr - 1), 2) / den))
        if d == 2:
            q = len(block_sizes) - 1
            dof = max(n, _ceil(Fraction((2 * q + 2) * (2 * q + 3), 6)))
    return BoundReport(n, d, rank, rank_bound, param_bound, structured, dof)


# ---------------------------------------------------------------------------
# the factored objective


def solve_lambda(Q, mats) -> np.ndarray:
    """Diagonals minimizing S at fixed ``Q``: ``sum_b (Q^T Q)_{ab}^2 lam_b = (Q^T A Q)_{aa}``."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    arrs = _arrays(mats)
    P = Q.T @ Q
    M = P * P
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[0] == 0.0 or sv[-1] <= 1e-10 * sv[0]:
        raise SingularLambdaSystem("lambda system singular")
    lu = scipy.linalg.lu_factor(M)
    rhs = np.array([np.einsum("ka,kl,la->a", Q, a, Q) for a in arrs])
    return np.array([scipy.linalg.lu_solve(lu, r) for r in rhs])


def s_objective(Q, lambdas, mats, zero_block_spec=None, qfull=None) -> tuple[float, float]:
    """Return ``(S, penalty)``.

    S is half the summed squared misfit of ``Q diag(lambda_i) Q^T`` to ``A_i``;
    the penalty sums squares of the entries of the completed extension that
    couple the first ``zero_block_spec`` rows to the added columns.
    """
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    lambdas = np.atleast_2d(np.asarray(lambdas, dtype=float))
    arrs = _arrays(mats)
    n = Q.shape[0]
    misfit = 0.5 * sum(float(np.sum((a - (Q * lam) @ Q.T) ** 2)) for a, lam in zip(arrs, lambdas))
    m = _zero_rows(zero_block_spec)
    pen = 0.0
    if m:
        Qt = complete_orthonormal(Q) if qfull is None else np.asarray(qfull, dtype=float)
        for lam in lambdas:
            pen += float(np.sum(((Qt[:m] * lam) @ Qt[n:].T) ** 2))
    return misfit, pen


def _total(Qt, arrs, n, m):
    lam = solve_lambda(Qt[:n], arrs)
    misfit, pen = s_objective(Qt[:n], lam, arrs, m, qfull=Qt)
    return misfit + pen, lam


def rotation_angle_minimize(f, span: float = math.pi / 4, nscan: int = 64, tol: float = 1e-12) -> float:
    """Angle in (-span, span] minimizing ``f``: grid scan, then bounded Brent refinement.

    Returns 0 when no scanned or refined angle improves on ``f(0)``.
    """
    from scipy.optimize import minimize_scalar

    f0 = f(0.0)
    h = 2.0 * span / nscan
    grid = [-span + h * (k + 1) for k in range(nscan)]
    vals = [f(t) for t in grid]
    k = int(np.argmin(vals))
    best_t, best_f = grid[k], vals[k]
    lo, hi = grid[k] - h, min(grid[k] + h, span)
    res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": tol})
    if res.fun < best_f:
        best_t, best_f = float(res.x), float(res.fun)
    return best_t if best_f < f0 else 0.0


def start_rng(seed: int, start: int) -> np.random.Generator:
    """Independent generator for one start of a seeded multistart search."""
    return np.random.default_rng(np.random.SeedSequence(seed).spawn(start + 1)[start])


def random_orthogonal(N: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix."""
    z = rng.standard_normal((N, N))
    q, r = np.linalg.qr(z)
    return q * np.sign(np.diag(r))


def _sweep(Qt, arrs3, n, m):
    N = Qt.shape[0]
    # rotations mixing only added rows move within the family of equivalent
    # extensions and cannot lower the objective, so they are skipped
    for p in range(n):
        for r in range(p + 1, N):
            theta, _, _ = _accel.RotationObjective(Qt, arrs3, n, m, p, r).minimize()
            if theta != 0.0:
                rotate_rows(Qt, p, r, math.cos(theta), math.sin(theta))


def _extrapolate(Qt, prev, arrs, n, m, f):
    # repeat the net rotation of the last sweep with doubling length while it pays
    K = np.real(scipy.linalg.logm(Qt @ prev.T))
    K = 0.5 * (K - K.T)
    best, best_f, best_lam = Qt, f, None
    beta = 1.0
    while beta < 1e6:
        trial = scipy.linalg.expm(beta * K) @ Qt
        try:
            ft, lam = _total(trial, arrs, n, m)
        except SingularLambdaSystem:
            break
        if not ft < best_f:
            break
        best, best_f, best_lam = trial, ft, lam
        beta *= 2.0
    return best, best_f, best_lam


def _perturb(Qt, rng, n):
    p = int(rng.integers(n))
    r = int(rng.integers(Qt.shape[0] - 1))
    r += r >= p
    theta = rng.uniform(-math.pi, math.pi)
    rotate_rows(Qt, min(p, r), max(p, r), math.cos(theta), math.sin(theta))


def _start_point(N, n, arrs, m, rng, tries=20):
    for _ in range(tries):
        Qt = random_orthogonal(N, rng)
        try:
            f, lam = _total(Qt, arrs, n, m)
            return Qt, f, lam
        except SingularLambdaSystem:
            continue
    raise SingularLambdaSystem("lambda system singular at every random start")


def minimize_s(
    mats,
    N: int,
    zero_block_spec=None,
    *,
    max_sweeps: int = 5000,
    seed: int = 0,
    s_tol: float | None = None,
    multistarts: int = 8,
    extrapolate: bool = True,
    stall_window: int = 200,
    stall_ratio: float = 0.97,
    accept=None,
) -> ExtensionCandidate:
    """Search an N x N extension by Jacobi-rotation sweeps on ``Q``.

    Each rotation angle is chosen to minimize S + penalty with the diagonals
    re-solved at every trial angle.  ``max_sweeps`` is the budget shared by
    all starts: a start that stalls (objective not below ``stall_ratio`` times
    its value ``stall_window`` sweeps earlier) hands the rest of the budget to
    a fresh random start.  The best start is returned, ties going to the
    earlier one; its per-sweep history is nonincreasing.  ``accept``, if
    given, is called on each converged candidate and may reject it, in which
    case the search goes on with the next start.
    """
    arrs = _arrays(mats)
    n = arrs[0].shape[0]
    if N < n:
        raise ValueError(f"N={N} is smaller than n={n}")
    if max_sweeps < 0 or multistarts < 1:
        raise ValueError("max_sweeps must be >= 0 and multistarts >= 1")
    m = _zero_rows(zero_block_spec)
    if m > n:
        raise ValueError("zero_block_spec exceeds n")
    scale = problem_scale(arrs)
    if s_tol is None:
        s_tol = 1e-12 * scale
    arrs3 = np.ascontiguousarray(np.array(arrs))

    best = None
    used = 0
    starts = []
    for start in range(multistarts):
        if used >= max_sweeps and start > 0:
            break
        rng = start_rng(seed, start)
        Qt, f, lam = _start_point(N, n, arrs, m, rng)
        history = [f]
        status = "budget"
        k = 0
        while f > s_tol and used < max_sweeps:
            prev = Qt.copy()
            _sweep(Qt, arrs3, n, m)
            used += 1
            k += 1
            try:
                fn, lamn = _total(Qt, arrs, n, m)
            except SingularLambdaSystem:
                Qt = prev
                _perturb(Qt, rng, n)
                try:
                    fn, lamn = _total(Qt, arrs, n, m)
                except SingularLambdaSystem:
                    fn = math.inf
                if not fn <= f:
                    Qt, fn, lamn = prev, f, lam
            if extrapolate and fn < f:
                Qe, fe, lame = _extrapolate(Qt, prev, arrs, n, m, fn)
                if lame is not None:
                    Qt, fn, lamn = Qe, fe, lame
            if fn > f:
                # rounding floor reached: keep the better point and stop this start
                Qt = prev
                status = "floor"
                break
            f, lam = fn, lamn
            history.append(f)
            if k >= stall_window and f > s_tol and f > stall_ratio * history[k - stall_window]:
                status = "stalled"
                break
        if f <= s_tol:
            status = "converged"
        entry = {"start": start, "sweeps": k, "objective": f, "status": status}
        starts.append(entry)
        info = {"starts": starts, "best_start": start, "s_tol": s_tol, "scale": scale}
        if status == "converged":
            cand = ExtensionCandidate.from_factors(
                arrs, Qt, lam, m, method="minimize_s", seed=seed, sweeps=used, history=history, info=info,
            )
            cand.success = True
            if accept is None or accept(cand):
                return cand
            entry["status"] = "rejected"
        if best is None or f < best[0]:
            best = (f, Qt.copy(), lam, history, start)

    f, Qt, lam, history, start = best
    cand = ExtensionCandidate.from_factors(
        arrs, Qt, lam, m, method="minimize_s", seed=seed, sweeps=used, history=history,
        info={"starts": starts, "best_start": start, "s_tol": s_tol, "scale": scale},
    )
    return cand


def decay_rate(history, tail: float = 0.5) -> float:
    """Slope b of the fit ln S = a - b k over the last ``tail`` fraction of a history."""
    h = np.asarray(history, dtype=float)
    h = h[h > 0]
    if h.size < 3:
        return math.nan
    start = int(h.size * (1.0 - tail))
    y = np.log(h[start:])
    x = np.arange(start, h.size)
    if y.size < 2:
        return math.nan
    return float(-np.polyfit(x, y, 1)[0])


# ---------------------------------------------------------------------------
# gradient flow on structured blocks


class CommutatorObjective:
    """``||[X, Y]||_F^2`` for extensions of a pair with free added blocks.

    The free parameters are the coupling blocks of rows ``zero_rows..n-1`` to
    the added columns and the upper triangles of the symmetric added
    diagonal blocks, flattened in that order (first matrix, then second).
    """

    def __init__(self, A1, A2, N: int, zero_rows: int = 0):
        self.A = [as_array(A1), as_array(A2)]
        self.n = self.A[0].shape[0]
        self.N = N
        self.k = N - self.n
        if self.k < 0:
            raise ValueError("N must be >= n")
        self.rows = np.arange(zero_rows, self.n)
        self.iu = np.triu_indices(self.k)
        self.na = len(self.rows) * self.k
        self.nal = len(self.iu[0])
        self.size = 2 * (self.na + self.nal)

    def unpack(self, v):
        v = np.asarray(v, dtype=float)
        out = []
        for i in range(2):
            off = i * (self.na + self.nal)
            a = v[off:off + self.na].reshape(len(self.rows), self.k)
            al = np.zeros((self.k, self.k))
            al[self.iu] = v[off + self.na:off + self.na + self.nal]
            al = al + np.triu(al, 1).T
            out.append((a, al))
        return out

    def pack(self, blocks) -> np.ndarray:
        parts = []
        for a, al in blocks:
            parts.append(np.asarray(a, dtype=float).ravel())
            parts.append(np.asarray(al, dtype=float)[self.iu])
        return np.concatenate(parts)

    def from_matrices(self, mats) -> np.ndarray:
        """Parameters read off N x N matrices of the right layout."""
        n = self.n
        blocks = []
        for M in mats:
            M = as_array(M)
            blocks.append((M[self.rows, n:], M[n:, n:]))
        return self.pack(blocks)

    def build(self, v) -> list[np.ndarray]:
        n, out = self.n, []
        for A, (a, al) in zip(self.A, self.unpack(v)):
            M = np.zeros((self.N, self.N))
            M[:n, :n] = A
            M[self.rows, n:] = a
            M[n:, self.rows] = a.T
            M[n:, n:] = al
            out.append(M)
        return out

    def value(self, v) -> float:
        X, Y = self.build(v)
        comm = X @ Y - Y @ X
        return float(np.sum(comm * comm))

    def value_and_grad(self, v):
        X, Y = self.build(v)
        comm = X @ Y - Y @ X
        GX = 2.0 * (comm @ Y - Y @ comm)
        GY = 2.0 * (X @ comm - comm @ X)
        n = self.n
        blocks = []
        for G in (GX, GY):
            ga = G[self.rows, n:] + G[n:, self.rows].T
            gs = G[n:, n:] + G[n:, n:].T
            gs[np.diag_indices(self.k)] *= 0.5
            blocks.append((ga, gs))
        return float(np.sum(comm * comm)), self.pack(blocks)

    def gradient(self, v) -> np.ndarray:
        return self.value_and_grad(v)[1]


def gradient_flow(
    mats,
    N: int,
    zero_block_spec=None,
    *,
    step: float = 1e-2,
    max_iters: int = 20000,
    seed: int = 0,
    tol: float | None = None,
    multistarts: int = 8,
    stall_window: int = 2000,
    stall_ratio: float = 0.9,
    initial=None,
    accept=None,
) -> ExtensionCandidate:
    """Integrate ``v' = -grad ||[X(v), Y(v)]||_F^2`` by explicit Euler.

    The step is halved until the objective decreases and grown by 1.5 after
    each accepted step.  Each start gets ``max_iters`` steps; the search stops
    at the first start whose commutator norm drops to ``tol`` (default
    ``1e-13 * scale``) and that ``accept`` (if given) does not reject.
    ``initial`` replaces the random point of the first start; it is a flat
    parameter vector or the extended matrices of an earlier candidate.
    """
    arrs = _arrays(mats)
    if len(arrs) != 2:
        raise ValueError("gradient_flow needs exactly two matrices")
    n = arrs[0].shape[0]
    m = _zero_rows(zero_block_spec)
    obj = CommutatorObjective(arrs[0], arrs[1], N, m)
    scale = problem_scale(arrs)
    if tol is None:
        tol = 1e-13 * scale
    sigma = math.sqrt(scale / (2.0 * max(n, 1)))

    best = None
    starts = []
    for start in range(multistarts):
        rng = start_rng(seed, start)
        v = sigma * rng.standard_normal(obj.size)
        if start == 0 and initial is not None:
            v = obj.from_matrices(initial) if isinstance(initial, (list, tuple)) else np.asarray(initial, float)
        f, g = obj.value_and_grad(v)
        h = step
        history = [f]
        status = "budget"
        it = 0
        while it < max_iters:
            if math.sqrt(f) <= tol:
                status = "converged"
                break
            while True:
                v2 = v - h * g
                f2, g2 = obj.value_and_grad(v2)
                if f2 < f or h < 1e-300:
                    break
                h *= 0.5
            if not f2 < f:
                status = "floor"
                break
            v, f, g = v2, f2, g2
            h *= 1.5
            it += 1
            history.append(f)
            if it >= stall_window and f > stall_ratio * history[it - stall_window]:
                status = "stalled"
                break
        if math.sqrt(f) <= tol:
            status = "converged"
        entry = {"start": start, "iters": it, "objective": f, "status": status}
        starts.append(entry)
        if status == "converged":
            cand = ExtensionCandidate.from_extended(
                arrs, obj.build(v), m, method="gradient_flow", seed=seed, sweeps=it, history=history,
                info={"starts": starts, "best_start": start, "tol": tol, "scale": scale},
            )
            cand.success = True
            if accept is None or accept(cand):
                return cand
            entry["status"] = "rejected"
        if best is None or f < best[0]:
            best = (f, v, history, start, it)

    f, v, history, start, it = best
    return ExtensionCandidate.from_extended(
        arrs, obj.build(v), m, method="gradient_flow", seed=seed, sweeps=it, history=history,
        info={"starts": starts, "best_start": start, "tol": tol, "scale": scale},
    )


# ---------------------------------------------------------------------------
# structure checks


def structured_residual(c: ExtensionCandidate, block_sizes, tol: float = 1e-10) -> np.ndarray:
    """Residual norms of the four block equations for each i = 2..d, shape (d-1, 4).

    For the extension in tridiagonal block form these are the Frobenius norms
    of the commutator blocks (last-but-one, added), (last, last),
    (last, added) and (added, added) of ``[X_1, X_i]``.
    """
    n, N = c.n, c.N
    block_sizes = list(block_sizes)
    if sum(block_sizes) != n or len(block_sizes) < 2:
        raise ValueError(f"block sizes {block_sizes} inconsistent with n={n}")
    nr, npr = block_sizes[-1], block_sizes[-2]
    last = slice(n - nr, n)
    before = slice(n - nr - npr, n - nr)
    add = slice(n, N)
    X = c.extended_arrays
    scale = max(1.0, max(float(np.abs(x).max()) for x in X))
    for i, x in enumerate(X):
        if x.shape != (N, N):
            raise ValueError("extended matrices have the wrong shape")
        stray = np.abs(x[: n - nr, n:]).max(initial=0.0)
        if stray > tol * scale:
            raise ValueError(f"extension {i + 1} couples lower-degree rows to the added block ({stray:.3e})")

    def parts(x):
        return x[before, last], x[last, last], x[last, add], x[add, add]

    b1, al1, a1, be1 = parts(X[0])
    out = []
    for x in X[1:]:
        bi, ali, ai, bei = parts(x)
        r1 = b1 @ ai - bi @ a1
        r2 = b1.T @ bi - bi.T @ b1 + al1 @ ali - ali @ al1 + a1 @ ai.T - ai @ a1.T
        r3 = al1 @ ai - ali @ a1 + a1 @ bei - ai @ be1
        r4 = a1.T @ ai - ai.T @ a1 + be1 @ bei - bei @ be1
        out.append([float(np.linalg.norm(r)) for r in (r1, r2, r3, r4)])
    return np.array(out).reshape(len(X) - 1, 4)


@dataclass
class ExtendabilityResult:
    dependent: bool
    kernel: np.ndarray  # columns span the dependencies among the six vectors
    v: np.ndarray
    w: np.ndarray
    singular_values: np.ndarray


def extendability_test(A1, A2, rel_tol: float = 1e-10) -> ExtendabilityResult:
    """Necessary condition for a one-row symmetric extension of a pair.

    With ``[A1, A2] = w v^T - v w^T`` the six vectors ``v, w, A1 v, A1 w,
    A2 v, A2 w`` must be linearly dependent.
    """
    A1, A2 = as_array(A1), as_array(A2)
    comm = commutator(A1, A2)
    rank = numerical_rank(comm, rel_tol) if np.any(comm) else 0
    if rank != 2:
        raise CriterionInapplicable(f"extendability criterion inapplicable: commutator rank is {rank}, need 2")
    U, s, _ = np.linalg.svd(comm)
    u1, u2 = U[:, 0], U[:, 1]
    c = float(u1 @ comm @ u2)
    root = math.sqrt(abs(c))
    v = root * u2
    w = math.copysign(root, c) * u1
    vecs = np.column_stack([v, w, A1 @ v, A1 @ w, A2 @ v, A2 @ w])
    _, sv, Vt = np.linalg.svd(vecs)
    full = np.zeros(6)
    full[: sv.size] = sv
    null = full <= rel_tol * full[0]
    kernel = Vt.T[:, null] if Vt.shape[0] == 6 else scipy.linalg.null_space(vecs, rcond=rel_tol)
    return ExtendabilityResult(bool(null.any()), kernel, v, w, full)


def spectral_containment(A, Atilde, tol: float = 1e-10, block_tol: float = 1e-8) -> bool:
    """True when the spectrum of an extension spans that of its top-left block."""
    A, At = as_array(A), as_array(Atilde)
    n = A.shape[0]
    if At.shape[0] < n or np.abs(At[:n, :n] - A).max() > block_tol * max(1.0, np.abs(A).max()):
        raise ValueError("top-left block of the extension does not match")
    ev = sym_eigen(A)[0]
    evt = sym_eigen(At)[0]
    return bool(evt[0] <= ev[0] + tol and evt[-1] >= ev[-1] - tol)


def conjugate_family(c: ExtensionCandidate, U) -> ExtensionCandidate:
    """Equivalent extension obtained by an orthogonal change of basis on the added rows."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    k = c.N - c.n
    if U.shape != (k, k):
        raise ValueError(f"U must be {k} x {k}")
    if k and np.abs(U @ U.T - np.eye(k)).max() > 1e-10:
        raise ValueError("U is not orthogonal")
    W = np.eye(c.N)
    W[c.n:, c.n:] = U
    qfull = W @ c.qfull
    ext = [SymMatrix(W @ x @ W.T) for x in c.extended_arrays]
    return ExtensionCandidate(
        c.n, c.N, c.d, qfull[: c.n].copy(), qfull, c.lambdas.copy(), ext,
        c.objective, c.compat_penalty, _max_commutator([e.entries for e in ext]), c.zero_rows,
        c.method, c.seed, c.sweeps, c.success, list(c.history), dict(c.info),
    )
