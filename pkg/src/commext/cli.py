"""Command-line front end: ``commext bounds|solve|verify|fixture``.

Exit codes: 0 success, 1 configuration or I/O error, 2 search failure or a
rule that does not verify.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import cubature, fixtures
from .cubature import CubatureRule, SearchFailed
from .extensions import bound_report
from .moments import DomainError, WeightedDomain, coordinate_matrices, gram_schmidt_basis
from .output import nodes_svg, rule_csv

METHODS = ("auto", "radon", "minimize_s", "gradient_flow", "jacobi_1d")
FORMATS = ("json", "csv", "svg")


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors (exit 1), not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@dataclass
class ProblemConfig:
    domain: WeightedDomain
    q: int
    N: int | None = None
    method: str = "auto"
    seed: int = 0
    sweeps: int = 2000
    iters: int = 20000
    multistarts: int = 8
    tol: float = 1e-9
    out: Path = Path(".")
    formats: tuple = FORMATS
    extra: dict = field(default_factory=dict)

    def validate(self):
        if self.q < 0:
            raise ConfigError("q must be >= 0")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}")
        n = math.comb(self.domain.dim + self.q, self.domain.dim)
        if self.N is not None and self.N < n:
            raise ConfigError(f"N={self.N} is smaller than dim P_q = {n}")
        if self.method == "radon" and (self.domain.dim != 2 or self.q != 2):
            raise ConfigError("method radon needs a planar domain and q = 2")
        if self.method == "jacobi_1d" and self.domain.dim != 1:
            raise ConfigError("method jacobi_1d needs an interval domain")
        if self.method in ("minimize_s", "gradient_flow") and self.domain.dim != 2:
            raise ConfigError(f"method {self.method} is for planar domains")
        bad = set(self.formats) - set(FORMATS)
        if bad:
            raise ConfigError(f"unknown output formats {sorted(bad)}")
        if self.tol <= 0 or self.sweeps < 0 or self.iters < 0 or self.multistarts < 1:
            raise ConfigError("tolerances and budgets must be positive")
        return self


def _parse_domain(text) -> WeightedDomain:
    if isinstance(text, (dict, WeightedDomain)):
        return text if isinstance(text, WeightedDomain) else WeightedDomain.from_dict(text)
    text = text.strip()
    if text.startswith("{"):
        return WeightedDomain.from_dict(json.loads(text))
    return WeightedDomain.from_dict(text)


def _seed(flag, file_value):
    if flag is not None:
        return flag
    if file_value is not None:
        return int(file_value)
    env = os.environ.get("COMMEXT_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"COMMEXT_SEED must be an integer, got {env!r}") from None
    return 0


def load_config(args) -> ProblemConfig:
    """Merge a JSON config file (if any) with command-line flags; flags win."""
    data = {}
    if getattr(args, "config", None):
        try:
            data = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    budgets = data.get("budgets", {})
    output = data.get("output", {})

    def pick(flag, value, default):
        return flag if flag is not None else (value if value is not None else default)

    dom = pick(getattr(args, "domain", None), data.get("domain"), None)
    if dom is None:
        raise ConfigError("a domain is required (--domain or config)")
    q = pick(getattr(args, "q", None), data.get("q"), None)
    if q is None:
        raise ConfigError("q is required (--q or config)")
    formats = pick(getattr(args, "format", None), output.get("formats"), list(FORMATS))
    if isinstance(formats, str):
        formats = [f for f in formats.split(",") if f]
    try:
        cfg = ProblemConfig(
            domain=_parse_domain(dom),
            q=int(q),
            N=pick(getattr(args, "N", None), data.get("N"), None),
            method=pick(getattr(args, "method", None), data.get("method"), "auto"),
            seed=_seed(getattr(args, "seed", None), data.get("seed")),
            sweeps=int(pick(getattr(args, "budget_sweeps", None), budgets.get("sweeps"), 2000)),
            iters=int(pick(getattr(args, "budget_iters", None), budgets.get("iters"), 20000)),
            multistarts=int(pick(getattr(args, "budget_multistarts", None), budgets.get("multistarts"), 8)),
            tol=float(pick(getattr(args, "tol", None), data.get("tol"), 1e-9)),
            out=Path(pick(getattr(args, "out", None), output.get("dir"), ".")),
            formats=tuple(formats),
        )
    except (DomainError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    if cfg.N is not None:
        cfg.N = int(cfg.N)
    return cfg.validate()


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, allow_nan=True) + "\n"


# ---------------------------------------------------------------------------
# commands


def cmd_bounds(args) -> int:
    cfg = load_config(args)
    basis = gram_schmidt_basis(cfg.domain, cfg.q)
    cm = coordinate_matrices(cfg.domain, basis)
    rep = bound_report(cm)
    if args.json:
        print(_dump(rep.to_dict()), end="")
        return 0
    print(f"domain            {cfg.domain.kind}")
    print(f"q                 {cfg.q}")
    print(f"n = dim P_q       {rep.n}")
    print(f"commutator rank   {rep.max_commutator_rank}")
    for key in ("rank_bound", "param_bound", "structured_bound", "dof_bound_2d"):
        value = getattr(rep, key)
        shown = "-" if value is None else str(value)
        print(f"{key:<17} {shown:<6} {rep.labels[key]}")
    return 0


def _solve_rule(cfg: ProblemConfig) -> CubatureRule:
    method = cfg.method
    if cfg.domain.dim == 1:
        if cfg.N is not None and cfg.N != cfg.q + 1:
            raise ConfigError("interval rules from the tridiagonal matrix have exactly q + 1 nodes")
        return cubature.gauss_1d(cfg.domain, cfg.q)
    if method == "radon" or (method == "auto" and cfg.q == 2 and cfg.N in (None, 7)):
        if cfg.N not in (None, 7):
            raise ConfigError("the closed-form construction has N = 7")
        return cubature.radon_solve(cfg.domain)[0]
    return cubature.search_rule(
        cfg.domain, cfg.q, cfg.N, method="auto" if method == "auto" else method, seed=cfg.seed,
        multistarts=cfg.multistarts, max_sweeps=cfg.sweeps, max_iters=cfg.iters, tol=cfg.tol,
    )


def _extension_summary(rule: CubatureRule) -> dict:
    cand = rule.info.get("candidate")
    if cand is None:
        return {}
    return {
        "method": cand.method,
        "N": cand.N,
        "objective": cand.objective,
        "compat_penalty": cand.compat_penalty,
        "commutator_residual": cand.commutator_residual,
        "history": [float(x) for x in cand.history[:: max(1, len(cand.history) // 200)]],
    }


def cmd_solve(args) -> int:
    cfg = load_config(args)
    head = {"domain": cfg.domain.to_dict(), "q": cfg.q, "N": cfg.N, "method": cfg.method, "seed": cfg.seed}
    try:
        rule = _solve_rule(cfg)
    except SearchFailed as exc:
        _write(cfg.out / "report.json", _dump({**head, "status": "failed", "reason": exc.reason,
                                               "diagnostics": exc.diagnostics}))
        print(f"search failed: {exc.reason}", file=sys.stderr)
        return 2
    except cubature.CubatureError as exc:
        _write(cfg.out / "report.json", _dump({**head, "status": "failed", "reason": str(exc)}))
        print(f"solve failed: {exc}", file=sys.stderr)
        return 2
    mats = coordinate_matrices(cfg.domain, gram_schmidt_basis(cfg.domain, (rule.degree - 1) // 2))
    report = cubature.verify_rule(rule, tol=cfg.tol, mats=mats)
    ok = report.passed and report.node_count_ok is not False and report.node_span_ok is not False
    if "json" in cfg.formats:
        _write(cfg.out / "rule.json", rule.to_json(report) + "\n")
    if "csv" in cfg.formats:
        _write(cfg.out / "rule.csv", rule_csv(rule))
    if "svg" in cfg.formats:
        _write(cfg.out / "nodes.svg", nodes_svg(rule))
    extra = {"kernel_dim": rule.info["kernel_dim"]} if "kernel_dim" in rule.info else {}
    _write(cfg.out / "report.json", _dump({
        **head, "status": "ok" if ok else "unverified", "nodes": rule.size, "degree": rule.degree,
        "provenance": rule.provenance, "verification": report.to_dict(),
        "extension": _extension_summary(rule), **extra,
    }))
    print(f"{rule.size} nodes, degree {rule.degree}, max moment error {report.max_error:.3e} "
          f"({'pass' if ok else 'FAIL'}) -> {cfg.out}")
    return 0 if ok else 2


def _read_rule(path: Path) -> CubatureRule:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read rule file: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    try:
        return CubatureRule.from_dict(data)
    except (DomainError, ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def cmd_verify(args) -> int:
    path = Path(args.rule)
    rule = _read_rule(path)
    try:
        domain = _parse_domain(args.domain) if args.domain else rule.domain
    except (DomainError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if domain is None:
        raise ConfigError("the rule file names no domain; pass --domain")
    if domain.dim != rule.d:
        raise ConfigError("rule and domain dimensions differ")
    tol = args.tol if args.tol is not None else 1e-9
    q = (rule.degree - 1) // 2
    mats = coordinate_matrices(domain, gram_schmidt_basis(domain, q)) if rule.degree % 2 else None
    report = cubature.verify_rule(rule, domain, tol=tol, mats=mats)
    ok = report.passed and report.node_count_ok is not False and report.node_span_ok is not False
    out = Path(args.out) if args.out else path.parent
    _write(out / "report.json", _dump({"rule": str(path), "domain": domain.to_dict(),
                                       "status": "ok" if ok else "failed", "verification": report.to_dict()}))
    deg = ", ".join(f"{k}:{v:.1e}" for k, v in report.per_degree.items())
    print(f"max moment error {report.max_error:.3e} at {report.worst_monomial}  [{deg}]  "
          f"{'pass' if ok else 'FAIL'}")
    return 0 if ok else 2


_PLANTED = re.compile(r"planted\((\d+),(\d+),(\d+),(\d+)\)$")


def cmd_fixture(args) -> int:
    name = args.name.replace(" ", "")
    seed = _seed(args.seed, None)
    m = _PLANTED.match(name)
    if m:
        n, N, d, s = (int(g) for g in m.groups())
        fx = fixtures.planted(n, N, d, s)
    elif name == "planted":
        fx = fixtures.planted(args.n, args.N, args.d, seed)
    elif name == "obstructed_pair":
        fx = fixtures.obstructed_pair(seed)
    elif name == "circulant_demo":
        fx = fixtures.circulant_demo()
    else:
        raise ConfigError(f"unknown fixture {args.name!r}; choose from {fixtures.FIXTURES}")
    text = _dump(fx.to_dict())
    if args.out:
        _write(Path(args.out), text)
    else:
        print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="commext", description="Cubature rules from commuting extensions.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def problem(sp):
        sp.add_argument("--config", help="JSON config file; flags override its fields")
        sp.add_argument("--domain", help="kind name or JSON object, e.g. '{\"kind\": \"square_minus_square\", \"r\": 0.4}'")
        sp.add_argument("--q", type=int)

    b = sub.add_parser("bounds", help="print lower bounds and estimates for the node count")
    problem(b)
    b.add_argument("--json", action="store_true", help="print JSON instead of a table")
    b.set_defaults(func=cmd_bounds)

    s = sub.add_parser("solve", help="compute and verify a rule, writing artifacts")
    problem(s)
    s.add_argument("--N", type=int)
    s.add_argument("--method", choices=METHODS)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.add_argument("--format", help="comma-separated subset of json,csv,svg")
    s.add_argument("--tol", type=float)
    s.add_argument("--budget-sweeps", type=int)
    s.add_argument("--budget-iters", type=int)
    s.add_argument("--budget-multistarts", type=int)
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="check a rule file against exact moments")
    v.add_argument("rule")
    v.add_argument("--domain")
    v.add_argument("--tol", type=float)
    v.add_argument("--out", help="directory for report.json (default: next to the rule)")
    v.set_defaults(func=cmd_verify)

    f = sub.add_parser("fixture", help="emit seeded test matrices as JSON")
    f.add_argument("name", help="planted, planted(n,N,d,seed), obstructed_pair or circulant_demo")
    f.add_argument("--n", type=int, default=6)
    f.add_argument("--N", type=int, default=8)
    f.add_argument("--d", type=int, default=2)
    f.add_argument("--seed", type=int)
    f.add_argument("--out")
    f.set_defaults(func=cmd_fixture)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"commext: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"commext: I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
