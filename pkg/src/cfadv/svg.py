"""Minimal dependency-free SVG charts (boxplots and grouped bars).

Output is a pure function of the input numbers, so files are byte-stable.
"""

from __future__ import annotations

from html import escape

import numpy as np

PALETTE = ("#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3")


def _f(v: float) -> str:
    return f"{v:.2f}"


def box_stats(values) -> dict | None:
    """Quartiles and 1.5 IQR whiskers (clamped to the most extreme data inside the fences)."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        return None
    q1, med, q3 = (float(t) for t in np.percentile(v, [25, 50, 75]))
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    return {
        "q1": q1, "median": med, "q3": q3,
        "whisker_lo": float(inside.min()), "whisker_hi": float(inside.max()),
        "outliers": [float(t) for t in v[(v < lo_fence) | (v > hi_fence)]],
    }


class _Canvas:
    def __init__(self, width, height, title):
        self.w, self.h = width, height
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">',
            f'<rect width="{width}" height="{height}" fill="white"/>',
            f'<text x="{width / 2:.0f}" y="20" text-anchor="middle" font-family="sans-serif" '
            f'font-size="14">{escape(title)}</text>',
        ]

    def add(self, s):
        self.parts.append(s)

    def text(self, x, y, s, anchor="middle", size=11, rotate=None):
        tr = f' transform="rotate({rotate} {_f(x)} {_f(y)})"' if rotate is not None else ""
        self.add(f'<text x="{_f(x)}" y="{_f(y)}" text-anchor="{anchor}" font-family="sans-serif" '
                 f'font-size="{size}"{tr}>{escape(s)}</text>')

    def line(self, x1, y1, x2, y2, stroke="black", width=1):
        self.add(f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" '
                 f'stroke="{stroke}" stroke-width="{width}"/>')

    def rect(self, x, y, w, h, fill, stroke="black"):
        self.add(f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(w)}" height="{_f(h)}" '
                 f'fill="{fill}" stroke="{stroke}"/>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _y_axis(cv, left, top, bottom, vmax, ticks=5):
    cv.line(left, top, left, bottom)
    for k in range(ticks + 1):
        val = vmax * k / ticks
        y = bottom - (bottom - top) * k / ticks
        cv.line(left - 4, y, left, y)
        cv.text(left - 6, y + 4, f"{val:.3g}", anchor="end", size=10)


def boxplot_svg(groups: list[tuple[str, dict[str, list[float]]]], title: str = "") -> str:
    """Side-by-side boxplots: one group per label, one box per series inside a group.

    ``groups`` is ``[(group_label, {series_name: values})]``. A single value
    collapses to a flat line at that value.
    """
    series = []
    for _, d in groups:
        for name in d:
            if name not in series:
                series.append(name)
    width = max(240, 60 + 140 * max(1, len(groups)))
    height = 320
    left, right, top, bottom = 60, width - 20, 40, height - 60
    cv = _Canvas(width, height, title)
    stats = [[box_stats(d.get(s, [])) for s in series] for _, d in groups]
    vmax = max([st["whisker_hi"] for row in stats for st in row if st]
               + [o for row in stats for st in row if st for o in st["outliers"]] + [0.0])
    vmax = vmax * 1.05 if vmax > 0 else 1.0

    def ypos(v):
        return bottom - (bottom - top) * (v / vmax)

    _y_axis(cv, left, top, bottom, vmax)
    cv.line(left, bottom, right, bottom)
    slot = (right - left) / max(1, len(groups))
    bw = min(36.0, slot / (len(series) + 1))
    for g, ((label, _), row) in enumerate(zip(groups, stats)):
        x0 = left + g * slot
        cv.text(x0 + slot / 2, bottom + 18, label)
        for k, st in enumerate(row):
            if st is None:
                continue
            cx = x0 + slot / 2 + (k - (len(series) - 1) / 2) * bw * 1.2
            col = PALETTE[k % len(PALETTE)]
            cv.line(cx, ypos(st["whisker_lo"]), cx, ypos(st["q1"]))
            cv.line(cx, ypos(st["q3"]), cx, ypos(st["whisker_hi"]))
            cv.line(cx - bw / 4, ypos(st["whisker_lo"]), cx + bw / 4, ypos(st["whisker_lo"]))
            cv.line(cx - bw / 4, ypos(st["whisker_hi"]), cx + bw / 4, ypos(st["whisker_hi"]))
            cv.rect(cx - bw / 2, ypos(st["q3"]), bw, ypos(st["q1"]) - ypos(st["q3"]), col)
            cv.line(cx - bw / 2, ypos(st["median"]), cx + bw / 2, ypos(st["median"]), width=2)
            for o in st["outliers"]:
                cv.add(f'<circle cx="{_f(cx)}" cy="{_f(ypos(o))}" r="2" fill="none" stroke="{col}"/>')
    for k, name in enumerate(series):
        x = left + k * 120
        cv.rect(x, height - 39, 10, 10, PALETTE[k % len(PALETTE)])
        cv.text(x + 14, height - 30, name, anchor="start", size=10)
    return cv.render()


def bar_chart_svg(groups: list[tuple[str, dict[str, float | None]]], title: str = "", vmax: float = 1.0) -> str:
    """Grouped bars. Zero or missing values draw no bar, so absent matches stay visibly absent."""
    series = []
    for _, d in groups:
        for name in d:
            if name not in series:
                series.append(name)
    width = max(240, 60 + 120 * max(1, len(groups)))
    height = 300
    left, right, top, bottom = 60, width - 20, 40, height - 60
    cv = _Canvas(width, height, title)
    _y_axis(cv, left, top, bottom, vmax)
    cv.line(left, bottom, right, bottom)
    slot = (right - left) / max(1, len(groups))
    bw = slot / (len(series) + 1)
    for g, (label, d) in enumerate(groups):
        x0 = left + g * slot
        cv.text(x0 + slot / 2, bottom + 18, label, size=10)
        for k, name in enumerate(series):
            v = d.get(name)
            if v is None or not v > 0:
                continue
            h = (bottom - top) * min(v, vmax) / vmax
            cv.rect(x0 + bw / 2 + k * bw, bottom - h, bw, h, PALETTE[k % len(PALETTE)])
    for k, name in enumerate(series):
        x = left + k * 90
        cv.rect(x, height - 39, 10, 10, PALETTE[k % len(PALETTE)])
        cv.text(x + 14, height - 30, name, anchor="start", size=10)
    return cv.render()
