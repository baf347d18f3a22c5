"""A small SVG line/scatter plot writer (log or linear axes), no plotting dependency."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


@dataclass
class Series:
    label: str
    x: list
    y: list
    yerr: list | None = None
    line: bool = True
    dashed: bool = False


@dataclass
class Plot:
    title: str
    xlabel: str
    ylabel: str
    logx: bool = False
    logy: bool = False
    series: list = field(default_factory=list)
    hlines: list = field(default_factory=list)  # (y, label)
    width: int = 640
    height: int = 420

    def add(self, label, x, y, yerr=None, line=True, dashed=False) -> "Plot":
        self.series.append(Series(label, [float(v) for v in x], [float(v) for v in y],
                                  None if yerr is None else [float(v) for v in yerr], line, dashed))
        return self

    # -- coordinates --------------------------------------------------------
    def _tx(self, v, log):
        if log:
            return math.log10(v) if v > 0 else None
        return v if math.isfinite(v) else None

    def _range(self, vals, log):
        t = [self._tx(v, log) for v in vals]
        t = [v for v in t if v is not None]
        if not t:
            return 0.0, 1.0
        lo, hi = min(t), max(t)
        if hi - lo < 1e-12:
            lo, hi = lo - 0.5, hi + 0.5
        pad = 0.05 * (hi - lo)
        return lo - pad, hi + pad

    def render(self) -> str:
        ml, mr, mt, mb = 70, 150, 40, 50
        w, h = self.width, self.height
        pw, ph = w - ml - mr, h - mt - mb
        xs = [v for s in self.series for v in s.x]
        ys = [v for s in self.series for v in s.y]
        for s in self.series:
            if s.yerr:
                ys += [a - e for a, e in zip(s.y, s.yerr) if a - e > 0 or not self.logy]
                ys += [a + e for a, e in zip(s.y, s.yerr)]
        ys += [v for v, _ in self.hlines]
        x0, x1 = self._range(xs, self.logx)
        y0, y1 = self._range(ys, self.logy)

        def px(v):
            t = self._tx(v, self.logx)
            return None if t is None else ml + (t - x0) / (x1 - x0) * pw

        def py(v):
            t = self._tx(v, self.logy)
            return None if t is None else mt + ph - (t - y0) / (y1 - y0) * ph

        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
               f'font-family="sans-serif" font-size="12">',
               f'<rect width="{w}" height="{h}" fill="white"/>',
               f'<text x="{ml + pw / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(self.title)}</text>',
               f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
        for lo, hi, log, horiz in ((x0, x1, self.logx, True), (y0, y1, self.logy, False)):
            for k in range(5):
                t = lo + (hi - lo) * (k + 0.5) / 5
                label = f"{10 ** t:.3g}" if log else f"{t:.3g}"
                if horiz:
                    p = ml + (t - lo) / (hi - lo) * pw
                    out.append(f'<line x1="{p:.1f}" y1="{mt + ph}" x2="{p:.1f}" y2="{mt + ph + 5}" stroke="black"/>')
                    out.append(f'<text x="{p:.1f}" y="{mt + ph + 18}" text-anchor="middle">{label}</text>')
                else:
                    p = mt + ph - (t - lo) / (hi - lo) * ph
                    out.append(f'<line x1="{ml - 5}" y1="{p:.1f}" x2="{ml}" y2="{p:.1f}" stroke="black"/>')
                    out.append(f'<text x="{ml - 8}" y="{p + 4:.1f}" text-anchor="end">{label}</text>')
        out.append(f'<text x="{ml + pw / 2:.1f}" y="{h - 12}" text-anchor="middle">{escape(self.xlabel)}</text>')
        out.append(f'<text x="16" y="{mt + ph / 2:.1f}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {mt + ph / 2:.1f})">{escape(self.ylabel)}</text>')
        for v, label in self.hlines:
            p = py(v)
            if p is not None:
                out.append(f'<line x1="{ml}" y1="{p:.1f}" x2="{ml + pw}" y2="{p:.1f}" stroke="#999" stroke-dasharray="4 3"/>')
                out.append(f'<text x="{ml + pw - 4}" y="{p - 4:.1f}" text-anchor="end" fill="#666">{escape(label)}</text>')
        for i, s in enumerate(self.series):
            color = PALETTE[i % len(PALETTE)]
            pts = [(px(a), py(b)) for a, b in zip(s.x, s.y)]
            pts = [(a, b) for a, b in pts if a is not None and b is not None]
            if s.line and len(pts) > 1:
                d = " ".join(f"{a:.1f},{b:.1f}" for a, b in pts)
                dash = ' stroke-dasharray="6 4"' if s.dashed else ""
                out.append(f'<polyline points="{d}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
            for a, b in pts:
                out.append(f'<circle cx="{a:.1f}" cy="{b:.1f}" r="3" fill="{color}"/>')
            if s.yerr:
                for a, b, e in zip(s.x, s.y, s.yerr):
                    xa, lo, hi = px(a), py(b - e), py(b + e)
                    if xa is None or hi is None:
                        continue
                    lo = mt + ph if lo is None else lo
                    out.append(f'<line x1="{xa:.1f}" y1="{lo:.1f}" x2="{xa:.1f}" y2="{hi:.1f}" stroke="{color}"/>')
            ly = mt + 14 + 18 * i
            out.append(f'<rect x="{ml + pw + 10}" y="{ly - 9}" width="10" height="10" fill="{color}"/>')
            out.append(f'<text x="{ml + pw + 26}" y="{ly}">{escape(s.label)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.render())
