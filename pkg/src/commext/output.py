"""CSV and SVG renderings of cubature rules."""
from __future__ import annotations

import csv
import io

import numpy as np

from .cubature import CubatureRule
from .moments import HOLE_CENTER, WeightedDomain

SIZE = 800


def rule_csv(rule: CubatureRule) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"x{i + 1}" for i in range(rule.d)] + ["weight"])
    for x, w in zip(rule.nodes, rule.weights):
        writer.writerow([f"{v:.17g}" for v in x] + [f"{w:.17g}"])
    return buf.getvalue()


def _outline(domain: WeightedDomain | None):
    """Shapes in data coordinates: ('rect', x0, y0, x1, y1) or ('circle', cx, cy, r)."""
    if domain is None:
        return []
    if domain.kind == "interval":
        return [("rect", domain.a, -0.02, domain.b, 0.02)]
    if domain.kind == "square":
        return [("rect", -1.0, -1.0, 1.0, 1.0)]
    if domain.kind == "unit_disk":
        return [("circle", 0.0, 0.0, 1.0)]
    if domain.kind == "square_minus_square":
        cx, cy = (float(c) for c in HOLE_CENTER)
        r = domain.r
        return [("rect", -1.0, -1.0, 1.0, 1.0), ("rect", cx - r, cy - r, cx + r, cy + r)]
    return []  # the weighted plane has no boundary


def nodes_svg(rule: CubatureRule, domain: WeightedDomain | None = None) -> str:
    """Scatter plot of the nodes, marker radius proportional to sqrt(weight)."""
    domain = domain if domain is not None else rule.domain
    pts = rule.nodes if rule.d == 2 else np.column_stack([rule.nodes[:, 0], np.zeros(rule.size)])
    shapes = _outline(domain)
    xs = list(pts[:, 0]) + [0.0]
    ys = list(pts[:, 1]) + [0.0]
    for s in shapes:
        if s[0] == "rect":
            xs += [s[1], s[3]]
            ys += [s[2], s[4]]
        else:
            xs += [s[1] - s[3], s[1] + s[3]]
            ys += [s[2] - s[3], s[2] + s[3]]
    lo = min(min(xs), min(ys))
    hi = max(max(xs), max(ys))
    span = (hi - lo) or 1.0
    lo -= 0.08 * span
    hi += 0.08 * span
    k = SIZE / (hi - lo)

    def px(x):
        return (x - lo) * k

    def py(y):
        return SIZE - (y - lo) * k

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">',
        f'<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>',
    ]
    for s in shapes:
        if s[0] == "rect":
            out.append(
                f'<rect x="{px(s[1]):.3f}" y="{py(s[4]):.3f}" width="{(s[3] - s[1]) * k:.3f}" '
                f'height="{(s[4] - s[2]) * k:.3f}" fill="none" stroke="black" stroke-width="2"/>'
            )
        else:
            out.append(
                f'<circle cx="{px(s[1]):.3f}" cy="{py(s[2]):.3f}" r="{s[3] * k:.3f}" '
                f'fill="none" stroke="black" stroke-width="2"/>'
            )
    wmax = float(rule.weights.max()) if rule.size else 1.0
    for (x, y), w in zip(pts, rule.weights):
        r = 3.0 + 17.0 * np.sqrt(max(w, 0.0) / wmax)
        out.append(f'<circle cx="{px(x):.3f}" cy="{py(y):.3f}" r="{r:.3f}" fill="steelblue" fill-opacity="0.8"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
