"""Minimal standalone SVG line charts.

Output is deterministic text (fixed precision, no timestamps) so plots can be
diffed like the CSVs they are drawn from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    style: str = "line"  # or "points"
    errors: np.ndarray | None = None


@dataclass
class Chart:
    title: str
    xlabel: str
    ylabel: str
    series: list[Series] = field(default_factory=list)
    logx: bool = False
    ylim: tuple[float, float] | None = None
    width: int = 720
    height: int = 420

    def add(self, label, x, y, style="line", errors=None):
        self.series.append(Series(label, np.asarray(x, float), np.asarray(y, float), style,
                                  None if errors is None else np.asarray(errors, float)))
        return self


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-9 * step:
        out.append(round(v, 12))
        v += step
    return out


def _fmt(v):
    return f"{v:.2f}"


def _label(v):
    return f"{v:g}"


def render(chart: Chart, comment: str | None = None) -> str:
    """SVG document text for ``chart``; ``comment`` is embedded verbatim as an XML comment."""
    W, H = chart.width, chart.height
    left, right, top, bottom = 70, 150, 40, 55
    pw, ph = W - left - right, H - top - bottom

    def tx(v):
        return np.log10(v) if chart.logx else v

    xs = [tx(s.x[np.isfinite(s.y)]) for s in chart.series if s.x.size]
    ys = []
    for s in chart.series:
        y = s.y[np.isfinite(s.y)]
        if s.errors is not None:
            e = s.errors[np.isfinite(s.y)]
            y = np.concatenate([y - e, y + e])
        ys.append(y)
    xs = np.concatenate(xs) if xs else np.array([0.0, 1.0])
    ys = np.concatenate(ys) if ys else np.array([0.0, 1.0])
    xs, ys = xs[np.isfinite(xs)], ys[np.isfinite(ys)]
    x0, x1 = (float(xs.min()), float(xs.max())) if xs.size else (0.0, 1.0)
    y0, y1 = chart.ylim or ((float(ys.min()), float(ys.max())) if ys.size else (0.0, 1.0))
    if x1 <= x0:
        x1 = x0 + 1
    if y1 <= y0:
        y1 = y0 + 1

    def px(v):
        return left + (tx(v) - x0) / (x1 - x0) * pw

    def py(v):
        return top + (1 - (v - y0) / (y1 - y0)) * ph

    out = ['<?xml version="1.0" encoding="UTF-8"?>']
    if comment:
        out.append("<!--\n" + comment.replace("--", "- -") + "\n-->")
    out.append(f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
               f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">')
    out.append(f'<rect width="{W}" height="{H}" fill="white"/>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="22" text-anchor="middle" font-size="14">'
               f'{escape(chart.title)}</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>')

    for v in _ticks(y0, y1):
        y = py(v)
        out.append(f'<line x1="{left}" y1="{_fmt(y)}" x2="{left + pw}" y2="{_fmt(y)}" stroke="#ddd"/>')
        out.append(f'<text x="{left - 6}" y="{_fmt(y + 4)}" text-anchor="end">{_label(v)}</text>')
    if chart.logx:
        xticks = [10.0 ** k for k in range(math.floor(x0), math.ceil(x1) + 1) if x0 <= k <= x1]
    else:
        xticks = _ticks(x0, x1)
    for v in xticks:
        x = px(v)
        out.append(f'<line x1="{_fmt(x)}" y1="{top}" x2="{_fmt(x)}" y2="{top + ph}" stroke="#eee"/>')
        out.append(f'<text x="{_fmt(x)}" y="{top + ph + 16}" text-anchor="middle">{_label(v)}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{H - 12}" text-anchor="middle">{escape(chart.xlabel)}</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(chart.ylabel)}</text>')

    for i, s in enumerate(chart.series):
        color = PALETTE[i % len(PALETTE)]
        ok = np.isfinite(s.x) & np.isfinite(s.y)
        pts = [(px(a), py(b)) for a, b in zip(s.x[ok], s.y[ok])]
        if s.style == "line":
            if pts:
                d = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in pts)
                out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{d}"/>')
            if s.errors is not None:
                for a, b, e in zip(s.x[ok], s.y[ok], s.errors[ok]):
                    out.append(f'<line x1="{_fmt(px(a))}" y1="{_fmt(py(b - e))}" x2="{_fmt(px(a))}" '
                               f'y2="{_fmt(py(b + e))}" stroke="{color}"/>')
        else:
            for a, b in pts:
                out.append(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="2.5" fill="{color}"/>')
        ly = top + 14 + 18 * i
        out.append(f'<rect x="{left + pw + 12}" y="{ly - 9}" width="12" height="10" fill="{color}"/>')
        out.append(f'<text x="{left + pw + 30}" y="{ly}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
