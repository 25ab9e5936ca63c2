"""Minimal deterministic SVG figures: notched box plots and scatter-with-fit.

Fixed canvas, no external assets, coordinates quantized to 0.01 px, so
identical inputs always produce identical bytes.
"""

from __future__ import annotations

import numpy as np

from .errors import UsageError
from .stats import BoxSummary, RegressionFit, box_summary

WIDTH = 640.0
HEIGHT = 480.0
MARGIN_L = 70.0
MARGIN_R = 20.0
MARGIN_T = 40.0
MARGIN_B = 50.0

_STYLE = (
    "text{font-family:sans-serif;font-size:12px;fill:#222}"
    ".axis{stroke:#222;stroke-width:1}"
    ".box{fill:#cfe2f3;stroke:#235;stroke-width:1}"
    ".median{stroke:#c00;stroke-width:1.5}"
    ".whisker{stroke:#235;stroke-width:1}"
    ".pt{fill:#235;fill-opacity:0.45;stroke:none}"
    ".fit{stroke:#c00;stroke-width:1.5}"
)


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class _Canvas:
    def __init__(self, title: str):
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{int(WIDTH)}" '
            f'height="{int(HEIGHT)}" viewBox="0 0 {int(WIDTH)} {int(HEIGHT)}">',
            f"<style>{_STYLE}</style>",
            f'<text x="{_fmt(WIDTH / 2)}" y="20" text-anchor="middle">{title}</text>',
        ]

    def line(self, x1, y1, x2, y2, cls):
        self.parts.append(
            f'<line class="{cls}" x1="{_fmt(x1)}" y1="{_fmt(y1)}" '
            f'x2="{_fmt(x2)}" y2="{_fmt(y2)}"/>'
        )

    def rect(self, x, y, w, h, cls):
        self.parts.append(
            f'<rect class="{cls}" x="{_fmt(x)}" y="{_fmt(y)}" '
            f'width="{_fmt(w)}" height="{_fmt(h)}"/>'
        )

    def circle(self, x, y, r, cls):
        self.parts.append(f'<circle class="{cls}" cx="{_fmt(x)}" cy="{_fmt(y)}" r="{r}"/>')

    def text(self, x, y, s, anchor="middle"):
        self.parts.append(f'<text x="{_fmt(x)}" y="{_fmt(y)}" text-anchor="{anchor}">{s}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _y_scale(lo: float, hi: float):
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    span = hi - lo

    def to_px(v: float) -> float:
        return MARGIN_T + (hi - v) / span * (HEIGHT - MARGIN_T - MARGIN_B)

    return to_px, lo, hi


def _y_axis(canvas: _Canvas, to_px, lo: float, hi: float, label: str):
    canvas.line(MARGIN_L, MARGIN_T, MARGIN_L, HEIGHT - MARGIN_B, "axis")
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        v = lo + frac * (hi - lo)
        y = to_px(v)
        canvas.line(MARGIN_L - 4, y, MARGIN_L, y, "axis")
        canvas.text(MARGIN_L - 8, y + 4, _fmt(v), anchor="end")
    canvas.text(16, MARGIN_T - 10, label, anchor="start")


def plot_box(models: list[tuple[str, np.ndarray]], title: str, y_label: str = "score") -> str:
    """Notched box plot per model, in the given model order."""
    if not models:
        raise UsageError("plot_box needs at least one model")
    summaries: list[tuple[str, BoxSummary]] = [
        (name, box_summary(scores)) for name, scores in models
    ]
    lo = min(s.whisker_low for _, s in summaries)
    hi = max(s.whisker_high for _, s in summaries)
    to_px, lo, hi = _y_scale(lo, hi)
    canvas = _Canvas(title)
    _y_axis(canvas, to_px, lo, hi, y_label)
    canvas.line(MARGIN_L, HEIGHT - MARGIN_B, WIDTH - MARGIN_R, HEIGHT - MARGIN_B, "axis")

    slot = (WIDTH - MARGIN_L - MARGIN_R) / len(summaries)
    box_w = min(60.0, slot * 0.5)
    for i, (name, s) in enumerate(summaries):
        cx = MARGIN_L + (i + 0.5) * slot
        y_q1, y_q3 = to_px(s.q1), to_px(s.q3)
        canvas.rect(cx - box_w / 2, y_q3, box_w, max(0.0, y_q1 - y_q3), "box")
        # notch ticks at the 95% CI of the median
        for v in (s.notch_low, s.notch_high):
            canvas.line(cx - box_w / 2, to_px(v), cx - box_w / 4, to_px(v), "whisker")
        canvas.line(cx - box_w / 2, to_px(s.median), cx + box_w / 2, to_px(s.median), "median")
        canvas.line(cx, y_q3, cx, to_px(s.whisker_high), "whisker")
        canvas.line(cx, to_px(s.whisker_low), cx, y_q1, "whisker")
        for v in (s.whisker_low, s.whisker_high):
            canvas.line(cx - box_w / 4, to_px(v), cx + box_w / 4, to_px(v), "whisker")
        canvas.text(cx, HEIGHT - MARGIN_B + 16, name)
        canvas.text(cx, HEIGHT - MARGIN_B + 32, _fmt(s.median))
    return canvas.render()


def plot_scatter_fit(
    x: np.ndarray, y: np.ndarray, fit: RegressionFit, title: str, x_label: str, y_label: str
) -> str:
    """Scatter of (x, y) with the fitted line drawn through the same transform."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size == 0:
        raise UsageError("plot_scatter_fit needs data")
    x_lo, x_hi = float(x.min()), float(x.max())
    if x_hi <= x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    y_ends = (fit.intercept + fit.slope * x_lo, fit.intercept + fit.slope * x_hi)
    lo = min(float(y.min()), *y_ends)
    hi = max(float(y.max()), *y_ends)
    to_py, lo, hi = _y_scale(lo, hi)

    def to_px(v: float) -> float:
        return MARGIN_L + (v - x_lo) / (x_hi - x_lo) * (WIDTH - MARGIN_L - MARGIN_R)

    canvas = _Canvas(title)
    _y_axis(canvas, to_py, lo, hi, y_label)
    canvas.line(MARGIN_L, HEIGHT - MARGIN_B, WIDTH - MARGIN_R, HEIGHT - MARGIN_B, "axis")
    for frac in (0.0, 0.5, 1.0):
        v = x_lo + frac * (x_hi - x_lo)
        canvas.text(to_px(v), HEIGHT - MARGIN_B + 16, _fmt(v))
    canvas.text(WIDTH / 2, HEIGHT - 12, x_label)
    for xi, yi in zip(x, y):
        canvas.circle(to_px(float(xi)), to_py(float(yi)), 2, "pt")
    canvas.line(to_px(x_lo), to_py(y_ends[0]), to_px(x_hi), to_py(y_ends[1]), "fit")
    canvas.text(
        WIDTH - MARGIN_R - 4,
        MARGIN_T + 14,
        f"slope {_fmt(fit.slope)} [{_fmt(fit.slope_ci_low)}, {_fmt(fit.slope_ci_high)}]",
        anchor="end",
    )
    return canvas.render()
