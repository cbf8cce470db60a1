"""Minimal self-contained SVG line plots: axes, ticks, log scales, legends.

Enough to visualize trajectories and sweep results without a plotting
dependency; styling is intentionally plain.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

__all__ = ["LinePlot"]

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
            "#17becf", "#7f7f7f")


def _nice_step(span: float) -> float:
    raw = span / 5.0
    mag = 10.0 ** math.floor(math.log10(raw))
    for m in (1.0, 2.0, 5.0, 10.0):
        if raw <= m * mag:
            return m * mag
    return 10.0 * mag


def _fmt(v: float) -> str:
    if v == 0.0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.1e}"
    return f"{v:.6g}"


class LinePlot:
    """Accumulates (x, y) series and renders one SVG file."""

    def __init__(self, title="", xlabel="", ylabel="", xlog=False, ylog=False,
                 width=640, height=420):
        self.title = title
        self.xlabel = xlabel
        self.ylabel = ylabel
        self.xlog = xlog
        self.ylog = ylog
        self.width = width
        self.height = height
        self.series = []

    def add(self, x, y, label=None, dashed=False):
        pts = []
        for xi, yi in zip(x, y):
            xi = float(xi)
            yi = float(yi)
            if not (math.isfinite(xi) and math.isfinite(yi)):
                continue
            if self.xlog and xi <= 0.0:
                continue
            if self.ylog and yi <= 0.0:
                continue
            pts.append((xi, yi))
        self.series.append((pts, label, dashed))

    def _ticks(self, lo: float, hi: float, log: bool):
        if log:
            d0 = math.ceil(math.log10(lo) - 1e-9)
            d1 = math.floor(math.log10(hi) + 1e-9)
            return [10.0**d for d in range(d0, d1 + 1)]
        step = _nice_step(hi - lo)
        first = math.ceil(lo / step - 1e-9) * step
        ticks = []
        v = first
        while v <= hi + 1e-9 * step:
            ticks.append(0.0 if abs(v) < 1e-12 * step else v)
            v += step
        return ticks

    def render(self) -> str:
        pts_all = [p for pts, _, _ in self.series for p in pts]
        if not pts_all:
            pts_all = [(0.0, 0.0), (1.0, 1.0)]
        xs = [p[0] for p in pts_all]
        ys = [p[1] for p in pts_all]
        tx = (lambda v: math.log10(v)) if self.xlog else (lambda v: v)
        ty = (lambda v: math.log10(v)) if self.ylog else (lambda v: v)
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
        if x0 == x1:
            x0, x1 = x0 - 0.5, x1 + 0.5
        if y0 == y1:
            y0, y1 = y0 - 0.5, y1 + 0.5
        fx0, fx1 = tx(x0), tx(x1)
        fy0, fy1 = ty(y0), ty(y1)
        pad_y = 0.05 * (fy1 - fy0)
        fy0, fy1 = fy0 - pad_y, fy1 + pad_y

        ml, mr, mt, mb = 62, 16, 34, 46
        W, H = self.width, self.height
        ax_w, ax_h = W - ml - mr, H - mt - mb

        def sx(v):
            return ml + (tx(v) - fx0) / (fx1 - fx0) * ax_w

        def sy(v):
            return H - mb - (ty(v) - fy0) / (fy1 - fy0) * ax_h

        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
               f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
               f'<rect width="{W}" height="{H}" fill="white"/>',
               f'<rect x="{ml}" y="{mt}" width="{ax_w}" height="{ax_h}" '
               f'fill="none" stroke="black"/>']
        if self.title:
            out.append(f'<text x="{W/2:.1f}" y="20" text-anchor="middle" '
                       f'font-size="13">{escape(self.title)}</text>')

        for v in self._ticks(x0, x1, self.xlog):
            px = sx(v)
            if ml - 1 <= px <= W - mr + 1:
                out.append(f'<line x1="{px:.1f}" y1="{H-mb}" x2="{px:.1f}" '
                           f'y2="{H-mb+4}" stroke="black"/>')
                out.append(f'<text x="{px:.1f}" y="{H-mb+16}" '
                           f'text-anchor="middle">{_fmt(v)}</text>')
        ylo = 10.0**fy0 if self.ylog else fy0
        yhi = 10.0**fy1 if self.ylog else fy1
        for v in self._ticks(ylo, yhi, self.ylog):
            py = sy(v)
            if mt - 1 <= py <= H - mb + 1:
                out.append(f'<line x1="{ml-4}" y1="{py:.1f}" x2="{ml}" '
                           f'y2="{py:.1f}" stroke="black"/>')
                out.append(f'<text x="{ml-7}" y="{py+3:.1f}" '
                           f'text-anchor="end">{_fmt(v)}</text>')
        if self.xlabel:
            out.append(f'<text x="{ml + ax_w/2:.1f}" y="{H-10}" '
                       f'text-anchor="middle">{escape(self.xlabel)}</text>')
        if self.ylabel:
            out.append(f'<text x="16" y="{mt + ax_h/2:.1f}" text-anchor="middle" '
                       f'transform="rotate(-90 16 {mt + ax_h/2:.1f})">{escape(self.ylabel)}</text>')

        legend_y = mt + 14
        for i, (pts, label, dashed) in enumerate(self.series):
            color = _PALETTE[i % len(_PALETTE)]
            dash = ' stroke-dasharray="6 4"' if dashed else ""
            if len(pts) == 1:
                px, py = sx(pts[0][0]), sy(pts[0][1])
                out.append(f'<circle cx="{px:.1f}" cy="{py:.1f}" r="2.5" fill="{color}"/>')
            elif pts:
                coords = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in pts)
                out.append(f'<polyline points="{coords}" fill="none" '
                           f'stroke="{color}" stroke-width="1.4"{dash}/>')
            if label:
                lx = W - mr - 120
                out.append(f'<line x1="{lx}" y1="{legend_y-4}" x2="{lx+22}" '
                           f'y2="{legend_y-4}" stroke="{color}" stroke-width="2"{dash}/>')
                out.append(f'<text x="{lx+27}" y="{legend_y}">{escape(label)}</text>')
                legend_y += 15
        out.append("</svg>")
        return "\n".join(out)

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.render())
