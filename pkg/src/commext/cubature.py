"""Cubature rules from commuting extensions of the coordinate matrices.

A compatible extension of the matrices of multiplication by ``x_i`` has
common eigenvectors ``u_alpha``; the joint eigenvalue tuples are the nodes
and ``(u_alpha[0] / e_1)^2`` the weights, where ``e_1`` is the value of the
constant basis polynomial.  The rule is exact to degree ``2q + 1``.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .extensions import (
    ExtensionCandidate,
    SingularLambdaSystem,
    bound_report,
    gradient_flow,
    minimize_s,
    problem_scale,
)
from .linalg import commutator, numerical_rank, simultaneous_diagonalize, sym_eigen
from .moments import (
    CoordinateMatrices,
    GradedBasis,
    WeightedDomain,
    coordinate_matrices,
    graded_monomials,
    gram_schmidt_basis,
    moment,
)

PROVENANCES = ("radon_closed_form", "extension_search", "jacobi_1d")


class CubatureError(RuntimeError):
    pass


class PreconditionError(ValueError):
    pass


class SearchFailed(RuntimeError):
    """No verified rule was found; ``diagnostics`` holds what the searches reached."""

    def __init__(self, reason: str, diagnostics: dict | None = None):
        super().__init__(reason)
        self.reason = reason
        self.diagnostics = diagnostics or {}


@dataclass
class CubatureRule:
    """Nodes (one row per node) and positive weights, exact to total degree ``degree``."""

    d: int
    nodes: np.ndarray
    weights: np.ndarray
    degree: int
    provenance: str
    domain: WeightedDomain | None = None
    info: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float)).reshape(-1, self.d)
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if self.nodes.shape[0] != self.weights.size:
            raise ValueError("one weight per node is required")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        # stable order: lexicographic on coordinates rounded to 1e-9
        keys = np.round(self.nodes, 9)
        order = np.lexsort(keys.T[::-1])
        self.nodes = self.nodes[order]
        self.weights = self.weights[order]
        if "vectors" in self.info:
            self.info["vectors"] = self.info["vectors"][:, order]

    @property
    def size(self) -> int:
        return self.weights.size

    def integrate(self, f) -> float:
        """Apply the rule to a vectorized function of an (N, d) array of points."""
        return float(np.dot(self.weights, f(self.nodes)))

    def to_dict(self, verification: "VerificationReport | None" = None) -> dict:
        out = {
            "domain": self.domain.to_dict() if self.domain is not None else None,
            "d": self.d,
            "degree": self.degree,
            "nodes": self.nodes.tolist(),
            "weights": self.weights.tolist(),
            "provenance": self.provenance,
        }
        if verification is not None:
            out["verification"] = {"max_error": verification.max_error, "tol": verification.tol}
        return out

    def to_json(self, verification=None) -> str:
        return json.dumps(self.to_dict(verification), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "CubatureRule":
        for key in ("degree", "nodes", "weights"):
            if key not in data:
                raise ValueError(f"rule is missing field {key!r}")
        dom = data.get("domain")
        domain = WeightedDomain.from_dict(dom) if dom is not None else None
        nodes = np.array(data["nodes"], dtype=float)
        d = int(data.get("d", nodes.shape[1] if nodes.ndim == 2 else 1))
        return cls(d, nodes, np.array(data["weights"], dtype=float), int(data["degree"]),
                   data.get("provenance", "extension_search"), domain)

    @classmethod
    def from_json(cls, text: str) -> "CubatureRule":
        return cls.from_dict(json.loads(text))


@dataclass
class VerificationReport:
    """Moment errors of a rule, scaled by ``max(1, |moment|)``."""

    degree: int
    tol: float
    max_error: float
    max_abs_error: float
    worst_monomial: tuple
    per_degree: dict
    weight_sum_error: float
    positive: bool
    node_count_ok: bool | None = None
    node_span_ok: bool | None = None

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tol and self.positive

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "tol": self.tol,
            "passed": self.passed,
            "max_error": self.max_error,
            "max_abs_error": self.max_abs_error,
            "worst_monomial": list(self.worst_monomial),
            "per_degree": {str(k): v for k, v in self.per_degree.items()},
            "weight_sum_error": self.weight_sum_error,
            "positive_weights": self.positive,
            "node_count_ok": self.node_count_ok,
            "node_span_ok": self.node_span_ok,
        }


def verify_rule(rule: CubatureRule, domain: WeightedDomain | None = None, tol: float = 1e-9, mats=None) -> VerificationReport:
    """Compare the rule against exact moments on every monomial up to its degree.

    With ``mats`` given, and the rule exact, the node-count and node-span
    properties are evaluated as well.
    """
    domain = domain if domain is not None else rule.domain
    if domain is None:
        raise ValueError("a domain is needed to verify a rule")
    if domain.dim != rule.d:
        raise ValueError("rule and domain dimensions differ")
    mons = graded_monomials(rule.d, rule.degree)
    exps = np.array(mons)
    vals = np.prod(rule.nodes[:, None, :] ** exps[None, :, :], axis=2)
    approx = rule.weights @ vals
    exact = np.array([moment(domain, m) for m in mons])
    abs_err = np.abs(approx - exact)
    err = abs_err / np.maximum(1.0, np.abs(exact))
    worst = int(np.argmax(err))
    degs = exps.sum(axis=1)
    per_degree = {int(k): float(err[degs == k].max()) for k in range(rule.degree + 1)}
    report = VerificationReport(
        rule.degree, tol, float(err.max()), float(abs_err.max()), tuple(int(k) for k in mons[worst]),
        per_degree, float(abs(rule.weights.sum() - exact[0]) / max(1.0, abs(exact[0]))),
        bool(np.all(rule.weights > 0)),
    )
    if mats is not None and report.passed:
        report.node_count_ok = node_count_check(rule, mats, require_exact=False)
        report.node_span_ok = node_span_check(rule, mats, require_exact=False)
    return report


def _mat_arrays(mats):
    if isinstance(mats, CoordinateMatrices):
        return mats.arrays()
    return [np.asarray(getattr(m, "entries", m), dtype=float) for m in mats]


def _require_exact(rule, require_exact, tol):
    if require_exact:
        if rule.domain is None:
            raise PreconditionError("rule has no domain to verify against")
        if not verify_rule(rule, tol=tol).passed:
            raise PreconditionError("rule is not exact to its declared degree; check not applicable")


def node_count_check(rule: CubatureRule, mats, require_exact: bool = True, tol: float = 1e-9) -> bool:
    """Node count of an exact degree-(2q+1) rule is at least ``n + rank([A_i, A_j]) / 2``."""
    _require_exact(rule, require_exact, tol)
    arrs = _mat_arrays(mats)
    n = arrs[0].shape[0]
    rank = 0
    for i in range(len(arrs)):
        for j in range(i + 1, len(arrs)):
            rank = max(rank, numerical_rank(commutator(arrs[i], arrs[j])) if np.any(commutator(arrs[i], arrs[j])) else 0)
    return 2 * rule.size >= 2 * n + rank


def node_span_check(rule: CubatureRule, mats, require_exact: bool = True, tol: float = 1e-9) -> bool:
    """In every coordinate the nodes reach at least as far as the eigenvalues of ``A_i``."""
    _require_exact(rule, require_exact, tol)
    for i, A in enumerate(_mat_arrays(mats)):
        ev = sym_eigen(A)[0]
        x = rule.nodes[:, i]
        if not (x.min() <= ev[0] + tol and x.max() >= ev[-1] - tol):
            return False
    return True


def evaluation_identity_residual(vectors, points, basis: GradedBasis, rng=None, samples: int = 50) -> float:
    """Max over random ``p`` in P_q and nodes of ``|p . u - (u_0 / e_1) p(node)|``.

    ``vectors`` holds the joint eigenvectors as columns (their first ``n``
    entries are basis coordinates); projecting a polynomial onto one of them
    must equal evaluation at its node, up to the constant's projection.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    n = basis.n
    U = np.asarray(vectors)[:n]
    E = basis.evaluate(points)  # (N, n)
    factor = U[0] / basis.constant
    P = rng.standard_normal((samples, n))
    lhs = P @ U
    rhs = (P @ E.T) * factor
    return float(np.abs(lhs - rhs).max())


def rule_from_extension(
    c: ExtensionCandidate,
    basis: GradedBasis,
    domain: WeightedDomain,
    mats=None,
    tol: float = 1e-8,
    weight_floor: float = 1e-12,
    provenance: str = "extension_search",
) -> CubatureRule:
    """Read a rule off a compatible commuting extension.

    The extension must reproduce the coordinate matrices in its top-left
    block, keep the lower-degree rows decoupled from the added ones, and
    commute; all three are checked against ``tol`` relative to the scale.
    """
    if mats is None:
        mats = coordinate_matrices(domain, basis)
    arrs = _mat_arrays(mats)
    n = basis.n
    if c.n != n:
        raise CubatureError(f"extension is for n={c.n}, basis has n={n}")
    ext = c.extended_arrays
    scale = problem_scale(arrs)
    root = math.sqrt(max(scale, 1e-300))
    block = math.sqrt(sum(float(np.sum((e[:n, :n] - a) ** 2)) for e, a in zip(ext, arrs)))
    if block > tol * root:
        raise CubatureError(f"extension does not contain the coordinate matrices (misfit {block:.3e})")
    m = basis.dim_lower
    pen = math.sqrt(sum(float(np.sum(e[:m, n:] ** 2)) for e in ext))
    if pen > tol * root:
        raise CubatureError(f"compatibility violated: lower-degree rows couple to the added block ({pen:.3e})")
    js = simultaneous_diagonalize(ext, commute_tol=tol * scale)
    weights = (js.vectors[0] / basis.constant) ** 2
    total = weights.sum()
    if np.any(weights < -1e-12 * total):
        raise CubatureError("not a positive rule")
    small = weights <= weight_floor * total
    if np.any(small):
        warnings.warn(f"{int(small.sum())} node(s) carry weight below {weight_floor:g} of the total", RuntimeWarning)
    return CubatureRule(
        domain.dim, js.points, weights, 2 * basis.q + 1, provenance, domain,
        info={"vectors": js.vectors, "joint_residual": js.offdiag_residual},
    )


def gauss_1d(domain: WeightedDomain, q: int) -> CubatureRule:
    """Gaussian quadrature with q+1 nodes: eigenvalues of the tridiagonal coordinate matrix."""
    if domain.dim != 1:
        raise ValueError("gauss_1d needs an interval domain")
    basis = gram_schmidt_basis(domain, q)
    (A,) = coordinate_matrices(domain, basis).arrays()
    vals, vecs = sym_eigen(A, tol=1e-14)
    weights = (vecs[0] / basis.constant) ** 2
    if not (np.all(vals > domain.a) and np.all(vals < domain.b)):
        raise CubatureError("Gauss nodes left the interval")
    return CubatureRule(1, vals[:, None], weights, 2 * q + 1, "jacobi_1d", domain, info={"vectors": vecs})


# ---------------------------------------------------------------------------
# the closed-form 7-node degree-5 construction


class RadonError(CubatureError):
    pass


def cross_factor(skew, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Vectors with ``v w^T - w v^T = -skew`` for a 3 x 3 antisymmetric ``skew``.

    ``skew x = omega x x`` with axial vector ``omega``; we need ``v x w = omega``.
    ``v`` is the largest column of ``skew`` (orthogonal to ``omega``), rescaled so
    that ``v`` and ``w = omega x v / |v|^2`` have equal length.
    """
    skew = np.asarray(skew, dtype=float)
    if skew.shape != (3, 3):
        raise ValueError("skew must be 3 x 3")
    skew = 0.5 * (skew - skew.T)
    omega = np.array([skew[2, 1], skew[0, 2], skew[1, 0]])
    size = np.linalg.norm(omega)
    if size <= tol:
        raise RadonError("matrices already commute")
    col = skew[:, int(np.argmax(np.linalg.norm(skew, axis=0)))]
    v = math.sqrt(size) * col / np.linalg.norm(col)
    w = np.cross(omega, v) / (v @ v)
    return v, w


def _fibonacci_sphere(count: int) -> np.ndarray:
    i = np.arange(count) + 0.5
    z = 1.0 - 2.0 * i / count
    phi = math.pi * (1.0 + math.sqrt(5.0)) * i
    r = np.sqrt(1.0 - z * z)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def _admissibility(k) -> float:
    return float(k[2] * k[5] - k[3] * k[4])


def radon_solve(domain: WeightedDomain, family_param=None, rel_tol: float = 1e-10, verify_tol: float = 1e-9) -> list[CubatureRule]:
    """Closed-form 7-node degree-5 rules for a planar domain.

    One row and column are appended to the two 6 x 6 coordinate matrices for
    q = 2.  The new column is a combination of two vectors ``v, w``
    supported on the degree-2 rows with ``[A_1, A_2] = w v^T - v w^T``; its
    coefficients come from a null vector ``k`` of
    ``[v, w, A_1 v, A_1 w, A_2 v, A_2 w]``, usable iff
    ``k_3 k_6 - k_4 k_5 > 0`` (1-based).  When the null space is a plane,
    ``family_param`` ``t`` (a number or a sequence) picks
    ``k = cos(pi t) k1 + sin(pi t) k2``.
    """
    if domain.dim != 2:
        raise ValueError("radon_solve needs a planar domain")
    basis = gram_schmidt_basis(domain, 2)
    cm = coordinate_matrices(domain, basis)
    A1, A2 = cm.arrays()
    comm = commutator(A1, A2)
    v3, w3 = cross_factor(comm[3:, 3:])
    v = np.concatenate([np.zeros(3), v3])
    w = np.concatenate([np.zeros(3), w3])
    M = np.column_stack([v, w, A1 @ v, A1 @ w, A2 @ v, A2 @ w])
    _, sv, Vt = np.linalg.svd(M)
    null = sv <= rel_tol * sv[0]
    kernel = Vt[null].T
    kdim = kernel.shape[1]
    if kdim == 0:
        raise RadonError("no Radon extension found: the six vectors are independent")

    explicit = family_param is not None
    if kdim == 1:
        choices = [(None, kernel[:, 0])]
    elif kdim == 2:
        if explicit:
            ts = [float(t) for t in np.atleast_1d(family_param)]
        else:
            grid = [0.0] + [j / 64 for j in range(1, 64)]
            ts = [next((t for t in grid if _admissibility(_family_vector(kernel, t)) > 0), 0.0)]
        choices = [(t, _family_vector(kernel, t)) for t in ts]
    else:
        warnings.warn(f"null space of dimension {kdim}; sampling its first three directions", RuntimeWarning)
        pts = _fibonacci_sphere(32)
        choices = [(tuple(p), kernel[:, :3] @ p) for p in pts]
        explicit = False

    rules = []
    for t, k in choices:
        D = _admissibility(k)
        if D <= 0:
            if explicit:
                raise RadonError(f"no Radon extension found for family_param={t}: k3 k6 - k4 k5 = {D:.3e}")
            continue
        c = 1.0 / math.sqrt(D)
        lam, mu, nu, rho = -c * k[4], -c * k[5], c * k[2], c * k[3]
        alpha = c * c * (k[1] * k[4] - k[0] * k[5])
        beta = c * c * (k[0] * k[3] - k[1] * k[2])
        a = lam * v + mu * w
        b = nu * v + rho * w
        X1 = np.block([[A1, a[:, None]], [a[None, :], np.array([[alpha]])]])
        X2 = np.block([[A2, b[:, None]], [b[None, :], np.array([[beta]])]])
        cand = ExtensionCandidate.from_extended(cm, [X1, X2], basis.dim_lower, method="radon")
        rule = rule_from_extension(cand, basis, domain, mats=cm, provenance="radon_closed_form")
        report = verify_rule(rule, tol=verify_tol)
        if not report.passed:
            raise RadonError(f"closed-form rule failed verification (max error {report.max_error:.3e})")
        rule.info.update(kernel_dim=kdim, family_param=t, admissibility=D, kernel=kernel,
                         candidate=cand, verification=report)
        rules.append(rule)
    if not rules:
        raise RadonError("no Radon extension found: no admissible null vector")
    return rules


def _family_vector(kernel, t):
    return math.cos(math.pi * t) * kernel[:, 0] + math.sin(math.pi * t) * kernel[:, 1]


def diametrical_pairs(rule: CubatureRule, tol: float = 1e-8) -> list[tuple[int, int]]:
    """Index pairs of nodes symmetric about the origin."""
    pairs, used = [], set()
    for i in range(rule.size):
        if i in used:
            continue
        for j in range(i + 1, rule.size):
            if j not in used and np.abs(rule.nodes[i] + rule.nodes[j]).max() <= tol:
                pairs.append((i, j))
                used.update((i, j))
                break
    return pairs


# ---------------------------------------------------------------------------
# searching


def search_rule(
    domain: WeightedDomain,
    q: int,
    N: int | None = None,
    *,
    method: str = "auto",
    seed: int = 0,
    multistarts: int = 8,
    max_sweeps: int = 2000,
    max_iters: int = 20000,
    tol: float = 1e-9,
    weight_floor: float = 1e-12,
) -> CubatureRule:
    """Find a positive degree-(2q+1) rule with N nodes by extension search.

    ``method`` is ``minimize_s``, ``gradient_flow`` or ``auto`` (gradient
    flow, then rotation sweeps).  A converged start is accepted only when
    its rule verifies at ``tol`` and no weight falls below ``weight_floor``
    of the total; otherwise the next start is tried.  Raises
    ``SearchFailed`` with diagnostics when nothing is accepted.
    """
    if domain.dim != 2:
        raise ValueError("search_rule needs a planar domain")
    methods = {"auto": ["gradient_flow", "minimize_s"], "gradient_flow": ["gradient_flow"],
               "minimize_s": ["minimize_s"]}
    if method not in methods:
        raise ValueError(f"unknown method {method!r}")
    basis = gram_schmidt_basis(domain, q)
    cm = coordinate_matrices(domain, basis)
    bounds = bound_report(cm)
    if N is None:
        N = max(bounds.dof_bound_2d or bounds.rank_bound, bounds.rank_bound)
    diagnostics = {"n": basis.n, "N": N, "bounds": bounds.to_dict(), "methods": {}}
    if N < bounds.rank_bound:
        raise SearchFailed(
            f"N={N} is below the commutator-rank bound {bounds.rank_bound} on the node count", diagnostics
        )
    scale = problem_scale(cm)
    accepted = {}

    def accept(cand):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                rule = rule_from_extension(cand, basis, domain, mats=cm, tol=1e-7)
        except Exception:
            return False
        if rule.weights.min() <= weight_floor * rule.weights.sum():
            return False
        report = verify_rule(rule, tol=tol, mats=cm)
        if not report.passed:
            return False
        rule.info.update(candidate=cand, verification=report)
        accepted["rule"] = rule
        return True

    def polish_and_accept(cand):
        # rotation sweeps stall near the rounding floor of S; finish on the structured blocks
        fine = gradient_flow(cm, N, basis.dim_lower, seed=seed, multistarts=1, max_iters=max_iters,
                             initial=cand.extended_arrays, step=1e-6)
        fine.info["from"] = "minimize_s"
        return fine.success and accept(fine)

    for name in methods[method]:
        if name == "gradient_flow":
            cand = gradient_flow(cm, N, basis.dim_lower, seed=seed, multistarts=multistarts,
                                 max_iters=max_iters, accept=accept)
        else:
            try:
                cand = minimize_s(cm, N, basis.dim_lower, seed=seed, multistarts=multistarts,
                                  max_sweeps=max_sweeps, s_tol=1e-14 * scale, accept=polish_and_accept)
            except SingularLambdaSystem as exc:
                diagnostics["methods"][name] = {"error": str(exc)}
                continue
        diagnostics["methods"][name] = {
            "objective": cand.objective,
            "compat_penalty": cand.compat_penalty,
            "commutator_residual": cand.commutator_residual,
            "starts": cand.info.get("starts", []),
            "history": [float(x) for x in cand.history[:: max(1, len(cand.history) // 200)]],
        }
        if "rule" in accepted:
            rule = accepted["rule"]
            rule.info["diagnostics"] = diagnostics
            return rule
    raise SearchFailed("no start produced a verified positive rule", diagnostics)
