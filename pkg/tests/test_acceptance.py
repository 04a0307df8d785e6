"""Acceptance suite: one test per criterion, each at its stated tolerance.

A summary line per criterion is printed at the end of the pytest run (see
conftest.py); running this file directly does the same for this file only.
"""
import functools
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from commext.cubature import (
    SearchFailed,
    diametrical_pairs,
    evaluation_identity_residual,
    gauss_1d,
    node_count_check,
    node_span_check,
    radon_solve,
    search_rule,
    verify_rule,
)
from commext.extensions import CommutatorObjective, circulant_extension, minimize_s, problem_scale, spectral_containment
from commext.fixtures import planted
from commext.moments import WeightedDomain, coordinate_matrices, gram_schmidt_basis

EXPECTED = json.loads((Path(__file__).parent / "data" / "expected.json").read_text())

RESULTS = {}

# seed sets tried for the degree-11 Gaussian search; each is a search_rule seed
# whose 8 multistarts draw independent streams
GAUSSIAN_SEED_SETS = (0, 1, 2, 3, 4)


def criterion(num, title):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                detail = fn(*args, **kwargs)
            except BaseException as exc:
                RESULTS[num] = (False, title, f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
                raise
            RESULTS[num] = (True, title, detail or "")
        return run
    return wrap


# -- rules shared between criteria ------------------------------------------------


def _entry(rule, dom, q):
    basis = gram_schmidt_basis(dom, q)
    return {"rule": rule, "basis": basis, "mats": coordinate_matrices(dom, basis)}


@functools.cache
def radon_square():
    dom = WeightedDomain("square")
    t0 = time.perf_counter()
    rules = radon_solve(dom)
    elapsed = time.perf_counter() - t0
    return _entry(rules[0], dom, 2), elapsed


@functools.cache
def radon_disk():
    dom = WeightedDomain("unit_disk")
    return [_entry(r, dom, 2) for r in radon_solve(dom, family_param=[0.0, 0.3])]


@functools.cache
def sms_sweep():
    out = {}
    for i in range(1, 9):
        dom = WeightedDomain("square_minus_square", r=i / 20)
        out[i] = _entry(radon_solve(dom)[0], dom, 2)
    return out


@functools.cache
def gauss_rules():
    dom = WeightedDomain("interval")
    return [_entry(gauss_1d(dom, q), dom, q) for q in range(10)]


@functools.cache
def gaussian_search():
    dom = WeightedDomain("gaussian_plane")
    outcomes = []
    for seed in GAUSSIAN_SEED_SETS:
        try:
            rule = search_rule(dom, 5, 26, seed=seed, multistarts=8, max_iters=20000, max_sweeps=2000)
        except SearchFailed as exc:
            outcomes.append((seed, None, exc))
        else:
            outcomes.append((seed, _entry(rule, dom, 5), None))
    return outcomes


def all_rules():
    entries = [radon_square()[0], *radon_disk(), *sms_sweep().values(), *gauss_rules()]
    entries += [e for _, e, _ in gaussian_search() if e is not None]
    return entries


def _best_rotation_gap(a, b):
    """Largest node distance after the best rotation of b onto a (nodes matched with weights)."""
    best = math.inf
    ring_a = a.nodes[np.linalg.norm(a.nodes, axis=1) > 1e-8]
    ring_b = b.nodes[np.linalg.norm(b.nodes, axis=1) > 1e-8]
    for pb in ring_b:
        ang = math.atan2(ring_a[0, 1], ring_a[0, 0]) - math.atan2(pb[1], pb[0])
        R = np.array([[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]])
        moved = b.nodes @ R.T
        dist = np.linalg.norm(a.nodes[:, None, :] - moved[None, :, :], axis=2)
        rows, cols = linear_sum_assignment(dist)
        # refine the angle by orthogonal Procrustes on the matched pairs
        U, _, Vt = np.linalg.svd(a.nodes[rows].T @ moved[cols])
        D = np.diag([1.0, np.sign(np.linalg.det(U @ Vt))])
        moved = moved @ (U @ D @ Vt).T
        gap = max(np.abs(a.nodes[rows] - moved[cols]).max(), np.abs(a.weights[rows] - b.weights[cols]).max())
        best = min(best, gap)
    return best


# -- criteria ------------------------------------------------------------------------


@criterion(1, "Radon square")
def test_criterion_1_radon_square():
    entry, elapsed = radon_square()
    rule = entry["rule"]
    assert rule.size == 7
    centre = int(np.argmin(np.linalg.norm(rule.nodes, axis=1)))
    assert np.abs(rule.nodes[centre]).max() < 1e-10
    assert abs(rule.weights[centre] - 8 / 7) < 1e-10
    others = np.delete(rule.nodes, centre, axis=0)
    assert np.abs(np.sum(others ** 2, axis=1) - 14 / 15).max() < 1e-10
    pairs = diametrical_pairs(rule)
    assert len(pairs) == 3 and centre not in {i for p in pairs for i in p}
    rep = verify_rule(rule)
    assert rep.max_error < 1e-10
    assert elapsed < 1.0
    return f"centre weight err {abs(rule.weights[centre] - 8 / 7):.1e}, max moment err {rep.max_error:.1e}, {elapsed:.3f} s"


@criterion(2, "Radon disk")
def test_criterion_2_radon_disk():
    a, b = (e["rule"] for e in radon_disk())
    for rule in (a, b):
        assert rule.info["kernel_dim"] == 2
        centre = int(np.argmin(np.linalg.norm(rule.nodes, axis=1)))
        assert abs(rule.weights[centre] - math.pi / 4) < 1e-10
        ring = np.delete(rule.nodes, centre, axis=0)
        assert ring.shape[0] == 6
        assert np.abs(np.sum(ring ** 2, axis=1) - 2 / 3).max() < 1e-10
    # the two family members are genuinely different
    assert np.abs(a.nodes - b.nodes).max() > 1e-3
    gap = _best_rotation_gap(a, b)
    assert gap < 1e-8
    return f"kernel dim 2, rotation gap between t=0 and t=0.3: {gap:.1e}"


@criterion(3, "square minus square sweep")
def test_criterion_3_square_minus_square():
    for i, entry in sms_sweep().items():
        rule = entry["rule"]
        assert rule.degree == 5 and rule.size == 7
        assert verify_rule(rule).passed, f"r={i}/20"
    rule = sms_sweep()[8]["rule"]
    outside = np.abs(rule.nodes).max(axis=1) > 1.0
    assert outside.sum() == 1
    x, y = rule.nodes[outside][0]
    assert abs(x - 0.1844) < 5e-4 and abs(y - 1.0360) < 5e-4
    share = 100 * rule.weights[outside][0] / rule.weights.sum()
    assert abs(share - 3.25) < 0.1
    return f"8 radii verified; outside node ({x:.5f}, {y:.5f}) with {share:.3f}% of the weight"


@criterion(4, "one-dimensional reduction")
def test_criterion_4_gauss():
    dom = WeightedDomain("interval")
    worst_oracle = worst_roots = 0.0
    for q, entry in enumerate(gauss_rules()):
        rule = entry["rule"]
        ref = EXPECTED["gauss_legendre"][str(q)]
        worst_oracle = max(worst_oracle, np.abs(rule.nodes[:, 0] - ref["nodes"]).max(),
                           np.abs(rule.weights - ref["weights"]).max())
        top = gram_schmidt_basis(dom, q + 1).coeffs[-1]
        roots = np.sort(np.polynomial.polynomial.polyroots(top).real)
        worst_roots = max(worst_roots, np.abs(rule.nodes[:, 0] - roots).max())
    assert worst_oracle < 1e-10
    assert worst_roots < 1e-9
    return f"vs moment-equation oracle {worst_oracle:.1e}; vs basis roots {worst_roots:.1e}"


@criterion(5, "circulant construction")
def test_criterion_5_circulant():
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        d = 2 + seed % 2
        n = 2 + (seed // 2) % 4
        mats = []
        for _ in range(d):
            g = rng.standard_normal((n, n))
            mats.append(0.5 * (g + g.T))
        ext = circulant_extension(mats)
        for i in range(d):
            assert np.array_equal(ext[i][:n, :n], mats[i])
            for j in range(i + 1, d):
                X, Y = ext[i], ext[j]
                rel = np.linalg.norm(X @ Y - Y @ X) / (np.linalg.norm(X) * np.linalg.norm(Y))
                worst = max(worst, rel)
    assert worst < 1e-12
    return f"100 seeds, worst relative residual {worst:.1e}"


@pytest.mark.slow
@criterion(6, "planted extension recovery")
def test_criterion_6_planted():
    wins = 0
    failures = []
    for seed in range(20):
        fx = planted(6, 7, 2, seed)
        scale = problem_scale(fx.mats)
        c = minimize_s(fx.mats, 7, seed=seed, multistarts=8, max_sweeps=5000, s_tol=1e-10 * scale)
        h = np.asarray(c.history)
        assert np.all(np.diff(np.log(h[h > 0])) <= 0), f"seed {seed}: history not monotone"
        total = c.objective + c.compat_penalty
        if total < 1e-10 * scale and c.sweeps <= 5000:
            wins += 1
        else:
            failures.append(f"{seed}:{total / scale:.1e}")
    assert wins >= 18
    return f"{wins}/20 seeds reached 1e-10*scale" + (f" (missed {', '.join(failures)})" if failures else "")


@criterion(7, "commutator gradient")
def test_criterion_7_gradient():
    dom = WeightedDomain("square")
    cm = coordinate_matrices(dom, gram_schmidt_basis(dom, 3))
    obj = CommutatorObjective(*cm.arrays(), N=13, zero_rows=6)
    rng = np.random.default_rng(2024)
    h = 1e-5
    worst = 0.0
    eye = np.eye(obj.size)
    for _ in range(20):
        v = rng.standard_normal(obj.size)
        g = obj.gradient(v)
        fd = np.array([(obj.value(v + h * e) - obj.value(v - h * e)) / (2 * h) for e in eye])
        worst = max(worst, np.linalg.norm(g - fd) / np.linalg.norm(fd))
    assert worst < 1e-6
    return f"20 points, {obj.size} parameters, worst relative error {worst:.1e}"


@criterion(8, "evaluation identity")
def test_criterion_8_evaluation_identity():
    worst = 0.0
    entries = all_rules()
    for k, e in enumerate(entries):
        rule = e["rule"]
        res = evaluation_identity_residual(rule.info["vectors"], rule.nodes, e["basis"],
                                           rng=np.random.default_rng(k), samples=50)
        worst = max(worst, res)
    assert worst < 1e-8
    return f"{len(entries)} extensions, worst residual {worst:.1e}"


@criterion(9, "spectral containment, node count and node span")
def test_criterion_9_properties():
    entries = all_rules()
    for e in entries:
        rule, cm = e["rule"], e["mats"]
        cand = rule.info.get("candidate")
        extended = cand.extended_arrays if cand is not None else cm.arrays()
        for A, X in zip(cm.arrays(), extended):
            assert spectral_containment(A, X)
        assert node_count_check(rule, cm)
        assert node_span_check(rule, cm)
    return f"{len(entries)} rules checked"


@criterion(10, "Gaussian plane degree 11")
def test_criterion_10_gaussian():
    outcomes = gaussian_search()
    ok = []
    for seed, entry, exc in outcomes:
        if entry is None:
            assert exc.diagnostics["methods"], "failure must carry diagnostics"
            continue
        rule = entry["rule"]
        rep = verify_rule(rule, tol=1e-8)
        assert rule.size == 26 and rule.degree == 11
        assert rep.passed and rep.positive and rep.max_error < 1e-8
        ok.append((seed, rep.max_error))
    assert ok
    return f"{len(ok)}/{len(outcomes)} seed sets succeeded; errors " + ", ".join(f"{s}:{m:.1e}" for s, m in ok)


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
