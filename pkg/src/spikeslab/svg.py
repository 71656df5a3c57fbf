"""Minimal SVG line and bar charts for the experiment reports.

No charting dependency: the output is a handful of hand-written SVG elements,
good enough to eyeball a band or compare two histograms.
"""

from __future__ import annotations

import os
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["line_chart", "bar_chart", "band_svg", "n0_svg"]

_W, _H, _PAD = 640, 400, 50
_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]


def _scale(lo, hi, a, b):
    span = (hi - lo) or 1.0
    return lambda v: a + (np.asarray(v, dtype=float) - lo) / span * (b - a)


def _frame(title, xlim, ylim) -> list:
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{_W / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" y2="{_H - _PAD}" stroke="black"/>',
        f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_H - _PAD}" stroke="black"/>',
    ]
    for val, x in ((xlim[0], _PAD), (xlim[1], _W - _PAD)):
        parts.append(f'<text x="{x}" y="{_H - _PAD + 16}" text-anchor="middle" '
                     f'font-size="11">{val:.3g}</text>')
    for val, y in ((ylim[0], _H - _PAD), (ylim[1], _PAD)):
        parts.append(f'<text x="{_PAD - 6}" y="{y + 4}" text-anchor="end" '
                     f'font-size="11">{val:.3g}</text>')
    return parts


def _legend(parts, labels):
    for i, lab in enumerate(labels):
        y = _PAD + 14 * i
        c = _COLORS[i % len(_COLORS)]
        parts.append(f'<rect x="{_W - _PAD - 120}" y="{y - 8}" width="10" height="10" fill="{c}"/>')
        parts.append(f'<text x="{_W - _PAD - 105}" y="{y + 1}" font-size="11">{escape(lab)}</text>')


def line_chart(x: Sequence[float], series: dict, title: str = "") -> str:
    """Polyline per named series, all sharing the x values."""
    x = np.asarray(x, dtype=float)
    ys = [np.asarray(v, dtype=float) for v in series.values()]
    ylo = min(float(np.nanmin(y)) for y in ys)
    yhi = max(float(np.nanmax(y)) for y in ys)
    sx = _scale(x.min(), x.max(), _PAD, _W - _PAD)
    sy = _scale(ylo, yhi, _H - _PAD, _PAD)
    parts = _frame(title, (x.min(), x.max()), (ylo, yhi))
    for i, y in enumerate(ys):
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(sx(x), sy(y)))
        parts.append(f'<polyline fill="none" stroke="{_COLORS[i % len(_COLORS)]}" '
                     f'stroke-width="1.5" points="{pts}"/>')
    _legend(parts, list(series))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def bar_chart(x: Sequence[int], series: dict, title: str = "") -> str:
    """Side-by-side bars per named series at integer positions x."""
    x = np.asarray(x, dtype=float)
    ys = [np.asarray(v, dtype=float) for v in series.values()]
    yhi = max(float(np.nanmax(y)) for y in ys) or 1.0
    sx = _scale(x.min() - 0.5, x.max() + 0.5, _PAD, _W - _PAD)
    sy = _scale(0.0, yhi, _H - _PAD, _PAD)
    slot = (sx(1.0) - sx(0.0)) / max(len(ys), 1)
    parts = _frame(title, (x.min(), x.max()), (0.0, yhi))
    for i, y in enumerate(ys):
        c = _COLORS[i % len(_COLORS)]
        for xv, yv in zip(x, y):
            left = sx(xv - 0.5) + i * slot
            top = sy(yv)
            parts.append(f'<rect x="{left:.2f}" y="{top:.2f}" width="{max(slot - 0.5, 0.5):.2f}" '
                         f'height="{(_H - _PAD) - top:.2f}" fill="{c}"/>')
    _legend(parts, list(series))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _write(path, text):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def band_svg(path, report) -> None:
    title = f"{report.model_tag} {report.params}"
    _write(path, line_chart(report.grid, {"lower": report.lower, "upper": report.upper,
                                          "mean": report.mean_curve}, title))


def n0_svg(path, report) -> None:
    j = np.arange(report.n_total + 1)
    series = {"mc": report.histogram}
    if report.table is not None:
        series = {"exact": report.table.probs, "mc": report.histogram}
    _write(path, bar_chart(j, series, f"{report.model_tag} {report.params}"))
