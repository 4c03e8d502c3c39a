"""A small deterministic SVG 1.1 line-plot writer with logarithmic axes."""
from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


@dataclass
class Series:
    label: str
    x: list
    y: list
    markers: bool = True
    dashed: bool = False


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _decades(lo: float, hi: float) -> list[int]:
    return list(range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1))


def loglog_svg(series: list[Series], title: str, xlabel: str, ylabel: str,
               notes: list[str] = (), width: int = 640, height: int = 440) -> str:
    """Render ``series`` on log-log axes; non-positive values are dropped."""
    pts = [(x, y) for s in series for x, y in zip(s.x, s.y) if x > 0 and y > 0]
    if not pts:
        raise ValueError("nothing to plot")
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    xd = _decades(min(xs), max(xs))
    yd = _decades(min(ys), max(ys))
    if xd[0] == xd[-1]:
        xd.append(xd[0] + 1)
    if yd[0] == yd[-1]:
        yd.append(yd[0] + 1)
    left, right, top, bottom = 80, 20, 40, 60
    pw, ph = width - left - right, height - top - bottom

    def X(v):
        return left + (math.log10(v) - xd[0]) / (xd[-1] - xd[0]) * pw

    def Y(v):
        return top + ph - (math.log10(v) - yd[0]) / (yd[-1] - yd[0]) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for e in xd:
        px = X(10.0**e)
        out.append(f'<line x1="{_fmt(px)}" y1="{top}" x2="{_fmt(px)}" y2="{top + ph}" stroke="#dddddd"/>')
        out.append(f'<text x="{_fmt(px)}" y="{top + ph + 18}" text-anchor="middle">1e{e}</text>')
    for e in yd:
        py = Y(10.0**e)
        out.append(f'<line x1="{left}" y1="{_fmt(py)}" x2="{left + pw}" y2="{_fmt(py)}" stroke="#dddddd"/>')
        out.append(f'<text x="{left - 6}" y="{_fmt(py + 4)}" text-anchor="end">1e{e}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 18}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="18" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {top + ph / 2:.1f})">{escape(ylabel)}</text>')
    for i, s in enumerate(series):
        col = PALETTE[i % len(PALETTE)]
        sp = [(X(x), Y(y)) for x, y in zip(s.x, s.y) if x > 0 and y > 0]
        if not sp:
            continue
        path = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in sp)
        dash = ' stroke-dasharray="6,4"' if s.dashed else ""
        out.append(f'<polyline points="{path}" fill="none" stroke="{col}" stroke-width="1.5"{dash}/>')
        if s.markers:
            out.extend(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="3" fill="{col}"/>' for a, b in sp)
        ly = top + 16 + 16 * i
        out.append(f'<line x1="{left + 10}" y1="{ly - 4}" x2="{left + 30}" y2="{ly - 4}" stroke="{col}"{dash}/>')
        out.append(f'<text x="{left + 36}" y="{ly}">{escape(s.label)}</text>')
    for j, note in enumerate(notes):
        out.append(f'<text x="{left + pw - 6}" y="{top + ph - 10 - 16 * j}" text-anchor="end">{escape(note)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
