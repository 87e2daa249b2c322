"""Minimal log-log line plots written as standalone SVG text."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

WIDTH, HEIGHT = 640, 440
MARGIN = (70, 20, 30, 50)   # left, right, top, bottom
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str
    dashed: bool = False


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def _decades(lo: float, hi: float) -> list[int]:
    return list(range(math.ceil(lo - 1e-9), math.floor(hi + 1e-9) + 1))


def loglog(series: list[Series], *, title: str = "", xlabel: str = "x",
           ylabel: str = "y") -> str:
    """SVG document with one polyline per series on log-log axes.

    Non-positive or non-finite points are skipped; each series is split
    into separate polylines at such gaps.
    """
    pts = []
    for s in series:
        x, y = np.asarray(s.x, float), np.asarray(s.y, float)
        ok = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
        pts.append((np.log10(np.where(ok, x, 1.0)), np.log10(np.where(ok, y, 1.0)), ok))
    allx = np.concatenate([lx[ok] for lx, _, ok in pts] or [np.zeros(1)])
    ally = np.concatenate([ly[ok] for _, ly, ok in pts] or [np.zeros(1)])
    if allx.size == 0:
        allx = ally = np.zeros(1)
    x0, x1 = math.floor(allx.min()), math.ceil(allx.max())
    y0, y1 = math.floor(ally.min()), math.ceil(ally.max())
    x1, y1 = max(x1, x0 + 1), max(y1, y0 + 1)
    left, right, top, bottom = MARGIN
    pw, ph = WIDTH - left - right, HEIGHT - top - bottom

    def px(lx):
        return left + (lx - x0) / (x1 - x0) * pw

    def py(ly):
        return top + (y1 - ly) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for d in _decades(x0, x1):
        X = _fmt(px(d))
        out.append(f'<line x1="{X}" y1="{top + ph}" x2="{X}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X}" y="{top + ph + 18}" text-anchor="middle">1e{d}</text>')
    for d in _decades(y0, y1):
        Y = _fmt(py(d))
        out.append(f'<line x1="{left - 5}" y1="{Y}" x2="{left}" y2="{Y}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{Y}" text-anchor="end" '
                   f'dominant-baseline="middle">1e{d}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{HEIGHT - 10}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="15" y="{top + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 15 {top + ph / 2})">{ylabel}</text>')
    if title:
        out.append(f'<text x="{left + pw / 2}" y="{top - 10}" text-anchor="middle">{title}</text>')
    for i, (s, (lx, ly, ok)) in enumerate(zip(series, pts)):
        color = PALETTE[i % len(PALETTE)]
        dash = ' stroke-dasharray="6 4"' if s.dashed else ""
        # split at invalid points
        runs, cur = [], []
        for j in range(lx.size):
            if ok[j]:
                cur.append(f"{_fmt(px(lx[j]))},{_fmt(py(ly[j]))}")
            elif cur:
                runs.append(cur)
                cur = []
        if cur:
            runs.append(cur)
        for r in runs:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} '
                       f'points="{" ".join(r)}"/>')
        ly_legend = top + 16 + 16 * i
        out.append(f'<line x1="{left + pw - 150}" y1="{ly_legend}" x2="{left + pw - 125}" '
                   f'y2="{ly_legend}" stroke="{color}" stroke-width="1.5"{dash}/>')
        out.append(f'<text x="{left + pw - 120}" y="{ly_legend}" '
                   f'dominant-baseline="middle">{s.label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
