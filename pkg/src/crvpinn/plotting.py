"""Tiny static SVG line charts with a logarithmic y axis."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

__all__ = ["line_chart_svg", "convergence_svg"]

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def line_chart_svg(series: dict, title: str = "", xlabel: str = "iteration", width: int = 640, height: int = 400) -> str:
    """``series`` maps a label to ``(xs, ys)``; non-positive y values are skipped."""
    pts = {k: [(x, y) for x, y in zip(*v) if y is not None and y > 0 and math.isfinite(y)] for k, v in series.items()}
    allp = [p for v in pts.values() for p in v]
    if not allp:
        raise ValueError("nothing to plot")
    x0, x1 = min(p[0] for p in allp), max(p[0] for p in allp)
    ly = [math.log10(p[1]) for p in allp]
    y0, y1 = math.floor(min(ly)), math.ceil(max(ly))
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    L, R, T, B = 70, 150, 40, 50
    pw, ph = width - L - R, height - T - B

    def sx(x):
        return L + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return T + (y1 - math.log10(y)) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">',
        f'<rect x="{L}" y="{T}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{L + pw / 2:.1f}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>',
    ]
    for e in range(y0, y1 + 1):
        y = T + (y1 - e) / (y1 - y0) * ph
        out.append(f'<line x1="{L}" x2="{L + pw}" y1="{y:.1f}" y2="{y:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{L - 6}" y="{y + 4:.1f}" text-anchor="end">1e{e}</text>')
    for x in (x0, (x0 + x1) / 2, x1):
        out.append(f'<text x="{sx(x):.1f}" y="{T + ph + 16}" text-anchor="middle">{x:g}</text>')
    for n, (label, p) in enumerate(pts.items()):
        color = _COLORS[n % len(_COLORS)]
        if p:
            d = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in p)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{d}"/>')
        ly_ = T + 14 + 18 * n
        out.append(f'<line x1="{L + pw + 10}" x2="{L + pw + 30}" y1="{ly_}" y2="{ly_}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{L + pw + 36}" y="{ly_ + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def convergence_svg(records, path, title: str = "") -> Path:
    it = [r.iteration for r in records]
    series = {
        "sqrt(loss)": (it, [r.sqrt_loss for r in records]),
        "error vs u*_h": (it, [r.err_discrete for r in records]),
        "error vs exact": (it, [r.err_analytic for r in records]),
    }
    if records and records[0].upper_bound is not None:
        series["lower bound"] = (it, [r.lower_bound for r in records])
        series["upper bound"] = (it, [r.upper_bound for r in records])
    path = Path(path)
    path.write_text(line_chart_svg(series, title))
    return path
