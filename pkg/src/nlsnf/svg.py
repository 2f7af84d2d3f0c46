"""Minimal deterministic SVG line charts (no plotting dependency)."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def line_chart(series: dict, title: str = "", xlabel: str = "", ylabel: str = "", logy: bool = False,
               width: int = 640, height: int = 400) -> str:
    """Render ``{label: (x, y)}`` as an SVG document string.

    Non-finite points (and non-positive ones on a log axis) are skipped.
    """
    ml, mr, mt, mb = 70, 150, 30, 45
    pw, ph = width - ml - mr, height - mt - mb
    cleaned = {}
    for label, (x, y) in series.items():
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        if logy:
            ok &= y > 0
            y = np.where(ok, np.log10(np.where(ok, y, 1.0)), 0.0)
        cleaned[label] = (x[ok], y[ok])
    xs = np.concatenate([c[0] for c in cleaned.values()]) if cleaned else np.zeros(0)
    ys = np.concatenate([c[1] for c in cleaned.values()]) if cleaned else np.zeros(0)
    x0, x1 = (float(xs.min()), float(xs.max())) if len(xs) else (0.0, 1.0)
    y0, y1 = (float(ys.min()), float(ys.max())) if len(ys) else (0.0, 1.0)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def px(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def py(v):
        return mt + ph - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for j in range(5):
        fx = x0 + (x1 - x0) * j / 4
        fy = y0 + (y1 - y0) * j / 4
        ylab = _fmt(10 ** fy) if logy else _fmt(fy)
        out.append(f'<text x="{px(fx):.2f}" y="{mt + ph + 16}" font-size="10" text-anchor="middle">{_fmt(fx)}</text>')
        out.append(f'<text x="{ml - 6}" y="{py(fy) + 3:.2f}" font-size="10" text-anchor="end">{ylab}</text>')
    for k, (label, (x, y)) in enumerate(cleaned.items()):
        colour = PALETTE[k % len(PALETTE)]
        if len(x):
            pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
            out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.2" points="{pts}"/>')
        ly = mt + 14 * (k + 1)
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly - 4}" x2="{ml + pw + 28}" y2="{ly - 4}" stroke="{colour}"/>')
        out.append(f'<text x="{ml + pw + 32}" y="{ly}" font-size="10">{escape(str(label))}</text>')
    out.append(f'<text x="{width / 2:.1f}" y="18" font-size="13" text-anchor="middle">{escape(title)}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 8}" font-size="11" text-anchor="middle">{escape(xlabel)}</text>')
    yl = escape(ylabel + (" (log10 axis)" if logy and ylabel else ""))
    out.append(f'<text x="14" y="{mt + ph / 2:.1f}" font-size="11" text-anchor="middle" '
               f'transform="rotate(-90 14 {mt + ph / 2:.1f})">{yl}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"

