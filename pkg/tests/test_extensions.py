import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commext.extensions import (
    CommutatorObjective,
    ExtensionCandidate,
    CriterionInapplicable,
    SingularLambdaSystem,
    bound_report,
    circulant_extension,
    conjugate_family,
    decay_rate,
    extendability_test,
    gradient_flow,
    minimize_s,
    problem_scale,
    random_orthogonal,
    rotation_angle_minimize,
    s_objective,
    solve_lambda,
    spectral_containment,
    structured_residual,
)
from commext.fixtures import circulant_demo, obstructed_pair, planted
from commext.linalg import commutator
from commext.moments import WeightedDomain, coordinate_matrices, gram_schmidt_basis


def coord(kind, q):
    dom = WeightedDomain(kind)
    return coordinate_matrices(dom, gram_schmidt_basis(dom, q))


@pytest.fixture(scope="module")
def square_flow():
    cm = coord("square", 2)
    return cm, gradient_flow(cm, 7, 3, seed=0)


# -- circulant construction ------------------------------------------------

def test_circulant_scalar_demo():
    X, Y = circulant_extension([[[2.0]], [[3.0]]])
    assert np.array_equal(X, circulant_demo().extended[0])
    assert np.array_equal(Y, circulant_demo().extended[1])
    assert np.array_equal(X @ Y, Y @ X)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), d=st.integers(1, 4), n=st.integers(1, 5))
def test_circulant_extensions_commute(seed, d, n):
    rng = np.random.default_rng(seed)
    mats = [rng.standard_normal((n, n)) for _ in range(d)]
    ext = circulant_extension(mats)
    for i, e in enumerate(ext):
        assert e.shape == (d * n, d * n)
        assert np.array_equal(e[:n, :n], mats[i])
        for f in ext:
            assert np.linalg.norm(e @ f - f @ e) <= 1e-12 * max(1.0, np.linalg.norm(e) * np.linalg.norm(f))


def test_circulant_rejects_mixed_shapes():
    with pytest.raises(ValueError):
        circulant_extension([np.eye(2), np.eye(3)])
    with pytest.raises(ValueError):
        circulant_extension([])


# -- bounds -----------------------------------------------------------------

def test_bounds_square_q2():
    rep = bound_report(coord("square", 2))
    assert rep.n == 6 and rep.max_commutator_rank == 2 and rep.rank_bound == 7
    assert rep.labels["rank_bound"] == "rigorous"
    assert rep.labels["dof_bound_2d"] == "heuristic"


def test_bounds_gaussian_q5():
    rep = bound_report(coord("gaussian_plane", 5))
    assert rep.dof_bound_2d == 26
    assert rep.rank_bound == 24


def test_bounds_interval_is_n():
    dom = WeightedDomain("interval")
    rep = bound_report(coordinate_matrices(dom, gram_schmidt_basis(dom, 3)))
    assert rep.rank_bound == rep.n == 4
    assert rep.dof_bound_2d is None


def test_bounds_reject_bad_blocks():
    with pytest.raises(ValueError):
        bound_report(coord("square", 2).arrays(), block_sizes=[1, 2])


def test_bound_dict_is_serializable():
    import json

    json.dumps(bound_report(coord("unit_disk", 3)).to_dict())


# -- factored objective ------------------------------------------------------

def test_solve_lambda_recovers_planted_diagonals():
    fx = planted(6, 7, 2, 3)
    lam = solve_lambda(fx.qfull[:6], fx.mats)
    assert np.allclose(lam, fx.lambdas, atol=1e-10)
    S, pen = s_objective(fx.qfull[:6], lam, fx.mats)
    assert S < 1e-20 and pen == 0.0


def test_solve_lambda_singular():
    Q = np.zeros((2, 3))
    Q[0, 0] = Q[1, 1] = 1.0
    with pytest.raises(SingularLambdaSystem):
        solve_lambda(Q, [np.eye(2)])


def test_penalty_counts_zero_block():
    fx = planted(3, 5, 2, 0)
    S, pen = s_objective(fx.qfull[:3], fx.lambdas, fx.mats, zero_block_spec=2, qfull=fx.qfull)
    expected = sum(float(np.sum(e[:2, 3:] ** 2)) for e in fx.extended)
    assert S < 1e-20
    assert pen == pytest.approx(expected, rel=1e-12)


def test_rotation_angle_minimize_cosine():
    assert rotation_angle_minimize(lambda t: -math.cos(4 * t - 0.4)) == pytest.approx(0.1, abs=1e-8)


def test_rotation_angle_minimize():
    assert rotation_angle_minimize(lambda t: (t + 0.5) ** 2) == pytest.approx(-0.5, abs=1e-6)
    assert rotation_angle_minimize(lambda t: t * t) == 0.0


def test_problem_scale():
    assert problem_scale([np.eye(2), 2 * np.eye(2)]) == pytest.approx(10.0)


# -- rotation search ----------------------------------------------------------

def test_minimize_s_small_planted():
    fx = planted(3, 4, 2, 1)
    c = minimize_s(fx.mats, 4, seed=0)
    assert c.success and c.method == "minimize_s"
    assert c.objective <= 1e-12 * problem_scale(fx.mats)
    assert c.commutator_residual < 1e-8
    assert all(b <= a for a, b in zip(c.history, c.history[1:]))
    for e, a in zip(c.extended_arrays, fx.mats):
        assert np.abs(e[:3, :3] - a.entries).max() < 1e-6


def test_minimize_s_is_deterministic():
    fx = planted(3, 4, 2, 2)
    a = minimize_s(fx.mats, 4, seed=5, max_sweeps=30)
    b = minimize_s(fx.mats, 4, seed=5, max_sweeps=30)
    assert a.history == b.history
    assert np.array_equal(a.qfull, b.qfull)


def test_minimize_s_respects_budget_and_reports_starts():
    fx = planted(6, 8, 2, 0)
    c = minimize_s(fx.mats, 8, seed=0, max_sweeps=3, multistarts=2)
    assert sum(s["sweeps"] for s in c.info["starts"]) <= 3
    assert c.sweeps <= 3
    assert {s["status"] for s in c.info["starts"]} <= {"converged", "stalled", "floor", "budget", "rejected"}


def test_minimize_s_accept_can_reject():
    fx = planted(3, 4, 2, 1)
    c = minimize_s(fx.mats, 4, seed=0, multistarts=2, accept=lambda cand: False)
    assert not c.success
    assert [s["status"] for s in c.info["starts"]] == ["rejected", "rejected"]


def test_minimize_s_argument_checks():
    fx = planted(3, 4, 2, 1)
    with pytest.raises(ValueError):
        minimize_s(fx.mats, 2)
    with pytest.raises(ValueError):
        minimize_s(fx.mats, 4, zero_block_spec=5)


def test_decay_rate_of_geometric_history():
    h = [10.0 * 0.5 ** k for k in range(40)]
    assert decay_rate(h) == pytest.approx(math.log(2.0), rel=1e-10)
    assert math.isnan(decay_rate([1.0]))


# -- gradient flow ------------------------------------------------------------

@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_commutator_gradient_central_differences(seed):
    cm = coord("square", 2)
    obj = CommutatorObjective(*cm.arrays(), N=8, zero_rows=3)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(obj.size)
    g = obj.gradient(v)
    h = 1e-5
    fd = np.array([(obj.value(v + h * e) - obj.value(v - h * e)) / (2 * h) for e in np.eye(obj.size)])
    assert np.linalg.norm(g - fd) / np.linalg.norm(fd) < 1e-6


def test_commutator_objective_layout():
    cm = coord("square", 2)
    obj = CommutatorObjective(*cm.arrays(), N=8, zero_rows=3)
    v = np.arange(obj.size, dtype=float)
    X, Y = obj.build(v)
    assert np.array_equal(X, X.T) and np.array_equal(Y, Y.T)
    assert not np.any(X[:3, 6:]) and not np.any(Y[:3, 6:])
    assert np.array_equal(obj.from_matrices([X, Y]), v)
    assert np.array_equal(obj.pack(obj.unpack(v)), v)
    with pytest.raises(ValueError):
        CommutatorObjective(*cm.arrays(), N=5)


def test_gradient_flow_square(square_flow):
    cm, c = square_flow
    assert c.success and c.N == 7
    assert c.commutator_residual < 1e-12 * problem_scale(cm)
    assert c.compat_penalty == 0.0
    res = structured_residual(c, cm.block_sizes)
    assert res.shape == (1, 4)
    assert res.max() < 1e-10


def test_gradient_flow_initial_point_is_kept(square_flow):
    cm, c = square_flow
    again = gradient_flow(cm, 7, 3, initial=c.extended_arrays, multistarts=1)
    assert again.success and again.sweeps == 0


def test_gradient_flow_needs_pair():
    fx = planted(3, 4, 3, 0)
    with pytest.raises(ValueError):
        gradient_flow(fx.mats, 4)


def test_structured_residual_rejects_coupled_rows():
    fx = planted(6, 7, 2, 0)
    c = ExtensionCandidate.from_extended(fx.mats, fx.extended)
    with pytest.raises(ValueError):
        structured_residual(c, [1, 2, 3])


# -- candidates ------------------------------------------------------------------

def test_candidate_from_factors_is_exact_for_planted():
    fx = planted(4, 6, 2, 11)
    c = ExtensionCandidate.from_factors(fx.mats, fx.qfull, fx.lambdas)
    assert c.objective < 1e-20
    assert c.commutator_residual < 1e-12


def test_candidate_json_round_trip(square_flow):
    _, c = square_flow
    back = ExtensionCandidate.from_json(c.to_json())
    assert back.N == c.N and back.method == c.method
    for a, b in zip(back.extended_arrays, c.extended_arrays):
        assert np.array_equal(a, b)
    assert np.array_equal(back.qfull, c.qfull)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_conjugate_family_keeps_commuting_and_top_block(seed):
    fx = planted(4, 7, 2, seed)
    c = ExtensionCandidate.from_factors(fx.mats, fx.qfull, fx.lambdas)
    U = random_orthogonal(3, np.random.default_rng(seed))
    c2 = conjugate_family(c, U)
    assert c2.commutator_residual < 1e-10
    for a, b in zip(c.extended_arrays, c2.extended_arrays):
        assert np.allclose(a[:4, :4], b[:4, :4], atol=1e-14)
        assert np.allclose(np.linalg.eigvalsh(a), np.linalg.eigvalsh(b), atol=1e-10)


def test_conjugate_family_rejects_non_orthogonal():
    fx = planted(4, 6, 2, 0)
    c = ExtensionCandidate.from_factors(fx.mats, fx.qfull, fx.lambdas)
    with pytest.raises(ValueError):
        conjugate_family(c, 2 * np.eye(2))
    with pytest.raises(ValueError):
        conjugate_family(c, np.eye(3))


# -- structural tests -------------------------------------------------------------

@pytest.mark.parametrize("seed", range(5))
def test_obstructed_pair_fails_extendability(seed):
    fx = obstructed_pair(seed)
    assert fx.commutator_rank == 2
    res = extendability_test(*(m.entries for m in fx.mats))
    assert not res.dependent
    C = commutator(*(m.entries for m in fx.mats))
    assert np.allclose(np.outer(res.w, res.v) - np.outer(res.v, res.w), C, atol=1e-12)


def test_square_pair_passes_extendability():
    res = extendability_test(*coord("square", 2).arrays())
    assert res.dependent and res.kernel.shape == (6, 2)


def test_extendability_needs_rank_two():
    with pytest.raises(CriterionInapplicable):
        extendability_test(np.eye(3), np.diag([1.0, 2.0, 3.0]))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(2, 5), extra=st.integers(1, 3))
def test_spectral_containment_for_planted(seed, n, extra):
    fx = planted(n, n + extra, 2, seed)
    for a, e in zip(fx.mats, fx.extended):
        assert spectral_containment(a, e)


def test_spectral_containment_checks_block():
    with pytest.raises(ValueError):
        spectral_containment(np.eye(2), np.zeros((3, 3)))
