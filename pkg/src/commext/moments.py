"""Weighted domains, exact moments, graded orthonormal bases and the
coordinate matrices ``(A_i)_ab = <e_a | x_i e_b>``.

Every inner product is computed from closed-form moments in extended
precision (mpmath) and only rounded to binary64 at the end, so the matrices
handed to the extension machinery are correct to working precision even for
moderately ill-conditioned monomial Gram matrices.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Sequence

import mpmath
import numpy as np

from .linalg import SymMatrix

MP_DPS = 50

KINDS = ("interval", "square", "unit_disk", "gaussian_plane", "square_minus_square")

# centre of the square removed in ``square_minus_square``
HOLE_CENTER = (mpmath.mpf(2) / 5, mpmath.mpf(3) / 5)


class DomainError(ValueError):
    pass


class DegenerateMomentsError(ValueError):
    pass


class StructureError(RuntimeError):
    """Raised when assembled matrices violate the block structure they must have."""


def _mp(x) -> mpmath.mpf:
    # repr() keeps e.g. 0.05 as the decimal 1/20 instead of its binary neighbour
    if isinstance(x, (int, np.integer)):
        return mpmath.mpf(int(x))
    return mpmath.mpf(repr(float(x)))


@dataclass(frozen=True)
class WeightedDomain:
    """An integration domain together with its weight function.

    ``a``/``b`` are used by ``interval``; ``r`` is the half-width of the square
    removed from ``[-1, 1]^2`` by ``square_minus_square``.
    """

    kind: str
    a: float = -1.0
    b: float = 1.0
    r: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unsupported domain kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "interval" and not self.a < self.b:
            raise DomainError("interval needs a < b")
        if self.kind == "square_minus_square" and not 0.0 <= self.r <= 0.4:
            raise DomainError("square_minus_square needs 0 <= r <= 2/5")

    @property
    def dim(self) -> int:
        return 1 if self.kind == "interval" else 2

    @property
    def odd_symmetric(self) -> bool:
        """True when every moment with an odd exponent vanishes."""
        if self.kind == "interval":
            return self.a == -self.b
        return self.kind in ("square", "unit_disk", "gaussian_plane") or (
            self.kind == "square_minus_square" and self.r == 0.0
        )

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "interval":
            out.update(a=self.a, b=self.b)
        elif self.kind == "square_minus_square":
            out["r"] = self.r
        return out

    @classmethod
    def from_dict(cls, spec) -> "WeightedDomain":
        if isinstance(spec, str):
            return cls(spec)
        if not isinstance(spec, dict) or "kind" not in spec:
            raise DomainError(f"domain spec must be a kind name or an object with 'kind': {spec!r}")
        extra = set(spec) - {"kind", "a", "b", "r"}
        if extra:
            raise DomainError(f"unknown domain fields: {sorted(extra)}")
        kw = {k: float(v) for k, v in spec.items() if k != "kind"}
        return cls(spec["kind"], **kw)


def _power_integral(lo: mpmath.mpf, hi: mpmath.mpf, k: int) -> mpmath.mpf:
    return (hi ** (k + 1) - lo ** (k + 1)) / (k + 1)


def _sym_interval(k: int) -> mpmath.mpf:
    # integral of t^k over [-1, 1]
    return mpmath.mpf(0) if k % 2 else mpmath.mpf(2) / (k + 1)


def _shifted_interval(c: mpmath.mpf, r: mpmath.mpf, k: int) -> mpmath.mpf:
    # integral of x^k over [c - r, c + r], expanded about c: no cancellation for small r
    total = mpmath.mpf(0)
    for j in range(0, k + 1, 2):
        total += mpmath.binomial(k, j) * c ** (k - j) * 2 * r ** (j + 1) / (j + 1)
    return total


@functools.lru_cache(maxsize=None)
def _moment_mp(domain: WeightedDomain, m: tuple) -> mpmath.mpf:
    with mpmath.workdps(MP_DPS):
        kind = domain.kind
        if kind == "interval":
            (k,) = m
            return _power_integral(_mp(domain.a), _mp(domain.b), k)
        p, q = m
        if kind == "square":
            return _sym_interval(p) * _sym_interval(q)
        if kind == "unit_disk":
            if p % 2 or q % 2:
                return mpmath.mpf(0)
            s = p + q
            return 2 * mpmath.gamma(mpmath.mpf(p + 1) / 2) * mpmath.gamma(mpmath.mpf(q + 1) / 2) / (
                (s + 2) * mpmath.gamma(mpmath.mpf(s + 2) / 2)
            )
        if kind == "gaussian_plane":
            if p % 2 or q % 2:
                return mpmath.mpf(0)
            return mpmath.gamma(mpmath.mpf(p + 1) / 2) * mpmath.gamma(mpmath.mpf(q + 1) / 2)
        if kind == "square_minus_square":
            r = _mp(domain.r)
            cx, cy = HOLE_CENTER
            return _sym_interval(p) * _sym_interval(q) - _shifted_interval(cx, r, p) * _shifted_interval(cy, r, q)
    raise DomainError(f"unsupported domain kind {domain.kind!r}")


def moment(domain: WeightedDomain, m: Sequence[int]) -> float:
    """Exact weighted integral of the monomial ``x^m`` over ``domain``."""
    m = tuple(int(k) for k in m)
    if len(m) != domain.dim:
        raise DomainError(f"multi-index {m} has wrong length for a {domain.dim}-D domain")
    if any(k < 0 for k in m):
        raise DomainError(f"negative exponent in {m}")
    return float(_moment_mp(domain, m))


def graded_monomials(d: int, q: int) -> list[tuple[int, ...]]:
    """Multi-indices of total degree <= q, graded, lexicographic (x1 first) within a degree."""

    def of_degree(deg, dims):
        if dims == 1:
            return [(deg,)]
        out = []
        for first in range(deg, -1, -1):
            out.extend((first,) + rest for rest in of_degree(deg - first, dims - 1))
        return out

    out = []
    for deg in range(q + 1):
        out.extend(of_degree(deg, d))
    return out


def block_sizes_for(d: int, q: int) -> list[int]:
    return [math.comb(m + d - 1, d - 1) for m in range(q + 1)]


@dataclass
class GradedBasis:
    """Orthonormal basis of P_q; row ``a`` of ``coeffs`` expresses e_a over ``monomials``."""

    q: int
    d: int
    monomials: list
    coeffs: np.ndarray
    block_sizes: list
    domain: WeightedDomain
    _coeffs_mp: object = field(default=None, repr=False, compare=False)

    @property
    def n(self) -> int:
        return len(self.monomials)

    @property
    def degrees(self) -> np.ndarray:
        return np.array([sum(m) for m in self.monomials])

    @property
    def dim_lower(self) -> int:
        """dim P_{q-1}: the rows that must decouple from the added block."""
        return self.n - self.block_sizes[-1]

    @property
    def constant(self) -> float:
        """Value of the constant basis element e_1."""
        return float(self.coeffs[0, 0])

    def monomial_values(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        exps = np.array(self.monomials)
        return np.prod(pts[:, None, :] ** exps[None, :, :], axis=2)

    def evaluate(self, points) -> np.ndarray:
        """Values e_a(x) with shape (npoints, n)."""
        return self.monomial_values(points) @ self.coeffs.T


def gram_schmidt_basis(domain: WeightedDomain, q: int) -> GradedBasis:
    """Orthonormalize the graded monomials of degree <= q under the domain's moments.

    Modified Gram-Schmidt in the moment inner product, repeated once
    ("twice is enough"), carried out in extended precision.
    """
    if q < 0:
        raise ValueError("q must be >= 0")
    d = domain.dim
    mons = graded_monomials(d, q)
    n = len(mons)
    with mpmath.workdps(MP_DPS):
        G = np.empty((n, n), dtype=object)
        for s in range(n):
            for t in range(s, n):
                G[s, t] = G[t, s] = _moment_mp(domain, tuple(a + b for a, b in zip(mons[s], mons[t])))
        zero, one = mpmath.mpf(0), mpmath.mpf(1)
        basis: list[np.ndarray] = []
        gbasis: list[np.ndarray] = []
        for a in range(n):
            x = np.array([zero] * n, dtype=object)
            x[a] = one
            norm0 = G[a, a]
            for _ in range(2):
                for e, ge in zip(basis, gbasis):
                    x = x - np.dot(ge, x) * e
            gx = G.dot(x)
            pivot = np.dot(x, gx)
            if pivot <= 0 or pivot < mpmath.mpf("1e-12") * norm0:
                raise DegenerateMomentsError(
                    f"degenerate moment functional: monomial {mons[a]} is numerically dependent"
                )
            inv = 1 / mpmath.sqrt(pivot)
            basis.append(x * inv)
            gbasis.append(gx * inv)
        cmat = np.array(basis, dtype=object)
    coeffs = np.array(cmat, dtype=float)
    return GradedBasis(q, d, mons, coeffs, block_sizes_for(d, q), domain, _coeffs_mp=cmat)


@dataclass
class CoordinateMatrices:
    mats: list
    block_sizes: list

    @property
    def d(self) -> int:
        return len(self.mats)

    @property
    def n(self) -> int:
        return self.mats[0].dim

    def arrays(self) -> list[np.ndarray]:
        return [m.entries for m in self.mats]


def _basis_coeffs_mp(basis: GradedBasis):
    if basis._coeffs_mp is not None:
        return basis._coeffs_mp
    return np.array([[_mp(v) for v in row] for row in basis.coeffs], dtype=object)


def coordinate_matrices(domain: WeightedDomain, basis: GradedBasis, tol: float = 1e-10) -> CoordinateMatrices:
    """Matrices of multiplication by x_i projected onto P_q, in the graded basis."""
    if basis.domain != domain:
        raise DomainError("basis was built for a different domain")
    mons = basis.monomials
    n = len(mons)
    cmat = _basis_coeffs_mp(basis)
    mats = []
    with mpmath.workdps(MP_DPS):
        for i in range(domain.dim):
            shift = tuple(1 if j == i else 0 for j in range(domain.dim))
            M = np.empty((n, n), dtype=object)
            for s in range(n):
                for t in range(s, n):
                    idx = tuple(a + b + c for a, b, c in zip(mons[s], mons[t], shift))
                    M[s, t] = M[t, s] = _moment_mp(domain, idx)
            mats.append(SymMatrix(np.array(cmat.dot(M).dot(cmat.T), dtype=float)))
    cm = CoordinateMatrices(mats, list(basis.block_sizes))
    _check_structure(cm, basis.degrees, tol)
    return cm


def _check_structure(cm: CoordinateMatrices, degrees: np.ndarray, tol: float) -> None:
    far = np.abs(degrees[:, None] - degrees[None, :]) >= 2
    scale = max(1.0, max(np.abs(m.entries).max() for m in cm.mats))
    for i, A in enumerate(cm.mats):
        bad = np.abs(A.entries[far]).max(initial=0.0)
        if bad > tol * scale:
            raise StructureError(f"A_{i + 1} couples non-adjacent degrees (|entry| = {bad:.3e})")
    nr = cm.block_sizes[-1]
    lower = cm.n - nr
    for i in range(cm.d):
        for j in range(i + 1, cm.d):
            Ai, Aj = cm.mats[i].entries, cm.mats[j].entries
            comm = Ai @ Aj - Aj @ Ai
            comm[lower:, lower:] = 0.0
            bad = np.abs(comm).max(initial=0.0)
            if bad > tol * scale * scale:
                raise StructureError(f"[A_{i + 1}, A_{j + 1}] nonzero outside its last block ({bad:.3e})")
