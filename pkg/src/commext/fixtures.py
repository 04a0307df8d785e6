"""Seeded test families with known extension properties."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .extensions import random_orthogonal
from .linalg import SymMatrix, commutator, numerical_rank


@dataclass
class Fixture:
    name: str
    mats: list
    extended: list | None = None
    qfull: np.ndarray | None = None
    lambdas: np.ndarray | None = None
    note: str = ""

    @property
    def commutator_rank(self) -> int:
        a = [m.entries for m in self.mats]
        return max(
            (numerical_rank(commutator(a[i], a[j])) for i in range(len(a)) for j in range(i + 1, len(a))),
            default=0,
        )

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "note": self.note,
            "commutator_rank": self.commutator_rank,
            "mats": [m.entries.tolist() for m in self.mats],
        }
        if self.extended is not None:
            out["extended"] = [np.asarray(e).tolist() for e in self.extended]
            out["lambdas"] = np.asarray(self.lambdas).tolist()
        return out


def planted(n: int, N: int, d: int = 2, seed: int = 0) -> Fixture:
    """Top-left n x n blocks of a random commuting N x N family."""
    if not 1 <= n <= N:
        raise ValueError("need 1 <= n <= N")
    rng = np.random.default_rng(seed)
    qfull = random_orthogonal(N, rng)
    lambdas = rng.standard_normal((d, N))
    ext = [(qfull * lam) @ qfull.T for lam in lambdas]
    mats = [SymMatrix(e[:n, :n]) for e in ext]
    return Fixture(f"planted({n},{N},{d},{seed})", mats, ext, qfull, lambdas,
                   note=f"restriction of a commuting {N}x{N} family")


def obstructed_pair(seed: int = 0) -> Fixture:
    """A 6 x 6 pair with rank-2 commutator but no symmetric 7 x 7 extension.

    ``A1 = diag(1..6)`` and ``A2`` has random diagonal and off-diagonal
    ``(w_a v_b - w_b v_a) / (a - b)`` for random ``v, w``, so that
    ``[A1, A2] = w v^T - v w^T``.
    """
    rng = np.random.default_rng(seed)
    lam = np.arange(1.0, 7.0)
    mu = rng.standard_normal(6)
    v = rng.standard_normal(6)
    w = rng.standard_normal(6)
    diff = lam[:, None] - lam[None, :]
    np.fill_diagonal(diff, 1.0)
    A2 = (np.outer(w, v) - np.outer(v, w)) / diff
    np.fill_diagonal(A2, mu)
    return Fixture(f"obstructed_pair({seed})", [SymMatrix(np.diag(lam)), SymMatrix(A2)],
                   note="rank-2 commutator; the one-row extension test fails")


def circulant_demo() -> Fixture:
    """The 1 x 1 pair (2), (3) and its 2 x 2 circulant extension."""
    ext = [np.array([[2.0, 3.0], [3.0, 2.0]]), np.array([[3.0, 2.0], [2.0, 3.0]])]
    return Fixture("circulant_demo", [SymMatrix([[2.0]]), SymMatrix([[3.0]])], ext,
                   note="block-circulant extension of two scalars")


FIXTURES = ("planted", "obstructed_pair", "circulant_demo")
