import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commext.linalg import (
    ConvergenceError,
    NotCommutingError,
    SymMatrix,
    commutator,
    complete_orthonormal,
    numerical_rank,
    off_norm,
    simultaneous_diagonalize,
    sym_eigen,
)


def random_sym(n, rng):
    a = rng.standard_normal((n, n))
    return 0.5 * (a + a.T)


def random_orthogonal(n, rng):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def test_symmatrix_symmetrizes_and_rejects_bad_input():
    m = SymMatrix([[1.0, 2.0], [0.0, 3.0]])
    assert np.array_equal(m.entries, m.entries.T)
    assert m.entries[0, 1] == 1.0
    with pytest.raises(ValueError):
        SymMatrix([[1.0, np.nan], [0.0, 1.0]])
    with pytest.raises(ValueError):
        SymMatrix(np.ones((2, 3)))


def test_sym_eigen_identity():
    vals, vecs = sym_eigen(np.eye(3))
    assert np.allclose(vals, 1.0)
    assert np.allclose(vecs, np.eye(3))


def test_sym_eigen_swap():
    vals, vecs = sym_eigen([[0.0, 1.0], [1.0, 0.0]])
    assert np.allclose(vals, [-1.0, 1.0], atol=1e-15)
    assert np.allclose(vecs.T @ vecs, np.eye(2), atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 12), seed=st.integers(0, 10_000))
def test_sym_eigen_reconstructs(n, seed):
    A = random_sym(n, np.random.default_rng(seed))
    vals, V = sym_eigen(A, tol=1e-12)
    assert np.all(np.diff(vals) >= 0)
    assert np.linalg.norm(V.T @ V - np.eye(n)) < 1e-12 * max(1, n)
    assert np.linalg.norm(A - (V * vals) @ V.T) <= 1e-12 * np.linalg.norm(A) * n


def test_sym_eigen_random_6x6_matches_numpy():
    A = random_sym(6, np.random.default_rng(3))
    vals, V = sym_eigen(A)
    assert np.allclose(vals, np.linalg.eigvalsh(A), atol=1e-13)
    assert np.linalg.norm(A - (V * vals) @ V.T) / np.linalg.norm(A) < 1e-12


def test_sym_eigen_signs_are_fixed():
    A = random_sym(5, np.random.default_rng(9))
    _, V = sym_eigen(A)
    for k in range(5):
        first = V[np.abs(V[:, k]) > 1e-8, k][0]
        assert first > 0


def test_sym_eigen_reports_nonconvergence():
    A = random_sym(8, np.random.default_rng(1))
    with pytest.raises(ConvergenceError) as info:
        sym_eigen(A, max_sweeps=1)
    assert info.value.residual > 0


def test_numerical_rank_basic():
    assert numerical_rank(np.zeros((4, 4))) == 0
    rng = np.random.default_rng(0)
    v, w = rng.standard_normal(5), rng.standard_normal(5)
    assert numerical_rank(np.outer(v, w) - np.outer(w, v)) == 2
    with pytest.raises(ValueError):
        numerical_rank(np.eye(2), rel_tol=0.0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(1, 5))
def test_numerical_rank_invariant_under_conjugation(seed, k):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((7, k))
    M = B @ B.T
    U = random_orthogonal(7, rng)
    assert numerical_rank(M) == numerical_rank(U @ M @ U.T) == k


def test_complete_orthonormal_cases():
    Q = random_orthogonal(4, np.random.default_rng(2))
    assert np.array_equal(complete_orthonormal(Q), Q)
    out = complete_orthonormal(np.array([[1.0, 0.0]]))
    assert np.allclose(np.abs(out[1]), [0.0, 1.0])
    with pytest.raises(ValueError):
        complete_orthonormal(np.array([[1.0, 1.0]]))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 6), extra=st.integers(0, 5))
def test_complete_orthonormal_keeps_top_block(seed, n, extra):
    N = n + extra
    Q = random_orthogonal(N, np.random.default_rng(seed))[:n]
    full = complete_orthonormal(Q)
    assert np.array_equal(full[:n], Q)
    assert np.linalg.norm(full @ full.T - np.eye(N)) < 1e-12


def test_complete_orthonormal_is_deterministic():
    Q = random_orthogonal(7, np.random.default_rng(5))[:3]
    assert np.array_equal(complete_orthonormal(Q), complete_orthonormal(Q.copy()))


def test_simultaneous_diagonalize_diagonal_pair():
    js = simultaneous_diagonalize([np.diag([1.0, 2.0, 3.0]), np.diag([4.0, 5.0, 6.0])])
    assert np.allclose(np.abs(js.vectors), np.eye(3))
    assert js.offdiag_residual == 0.0


def test_simultaneous_diagonalize_scalar_circulant():
    X = np.array([[2.0, 3.0], [3.0, 2.0]])
    Y = np.array([[3.0, 2.0], [2.0, 3.0]])
    js = simultaneous_diagonalize([X, Y])
    pts = sorted(map(tuple, np.round(js.points, 12)))
    assert pts == [(-1.0, 1.0), (5.0, 5.0)]


def test_simultaneous_diagonalize_resolves_degeneracy():
    rng = np.random.default_rng(4)
    U = random_orthogonal(6, rng)
    d1 = np.array([1.0, 1.0, 1.0, 2.0, 2.0, 3.0])
    d2 = np.array([0.0, 1.0, 2.0, 0.0, 1.0, 0.0])
    js = simultaneous_diagonalize([(U * d1) @ U.T, (U * d2) @ U.T])
    got = sorted(map(tuple, np.round(js.points, 10)))
    assert got == sorted(zip(d1, d2))
    V = js.vectors
    assert np.linalg.norm(V.T @ V - np.eye(6)) < 1e-12


def test_simultaneous_diagonalize_square_and_matrix():
    A = random_sym(6, np.random.default_rng(8))
    js = simultaneous_diagonalize([A, A @ A])
    assert np.allclose(js.values[1], js.values[0] ** 2, atol=1e-8)


def test_simultaneous_diagonalize_rejects_noncommuting():
    rng = np.random.default_rng(0)
    A, B = random_sym(4, rng), random_sym(4, rng)
    with pytest.raises(NotCommutingError) as info:
        simultaneous_diagonalize([A, B])
    assert info.value.max_commutator == pytest.approx(np.linalg.norm(commutator(A, B)))


def test_off_norm_has_no_cancellation_floor():
    a = np.diag([1e8, -1e8]) + 1e-3 * np.array([[0, 1], [1, 0]])
    assert off_norm(a) == pytest.approx(np.sqrt(2) * 1e-3, rel=1e-12)
