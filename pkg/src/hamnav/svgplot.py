"""Dependency-free SVG emission for the standard run plots.

Only the handful of primitives the report figures need: line charts with
axes/ticks/legend, and a top-down scene view with circles, rectangles, and
polylines. Coordinates are formatted with a fixed precision so outputs are
deterministic.
"""

from __future__ import annotations

import numpy as np

WIDTH, HEIGHT = 760, 480
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 36, 48
PALETTE = ["#1f77b4", "#2ca02c", "#d62728", "#9467bd", "#ff7f0e", "#8c564b"]


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _ticks(lo: float, hi: float, n: int = 6) -> np.ndarray:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10.0 ** np.floor(np.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = np.ceil(lo / step) * step
    return np.arange(start, hi + 0.5 * step, step)


class Axes:
    """Maps data coordinates into one SVG viewport and collects elements."""

    def __init__(self, xlim, ylim, title="", xlabel="", ylabel="", equal=False):
        self.xlim = list(xlim)
        self.ylim = list(ylim)
        if equal:  # pad the smaller span so scales match
            spanx = self.xlim[1] - self.xlim[0]
            spany = self.ylim[1] - self.ylim[0]
            availx = WIDTH - MARGIN_L - MARGIN_R
            availy = HEIGHT - MARGIN_T - MARGIN_B
            if spanx / availx > spany / availy:
                extra = spanx / availx * availy - spany
                self.ylim[0] -= extra / 2
                self.ylim[1] += extra / 2
            else:
                extra = spany / availy * availx - spanx
                self.xlim[0] -= extra / 2
                self.xlim[1] += extra / 2
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.elements: list[str] = []
        self.legend: list[tuple[str, str]] = []

    def _x(self, x):
        x0, x1 = self.xlim
        return MARGIN_L + (np.asarray(x) - x0) / (x1 - x0) * (WIDTH - MARGIN_L - MARGIN_R)

    def _y(self, y):
        y0, y1 = self.ylim
        return HEIGHT - MARGIN_B - (np.asarray(y) - y0) / (y1 - y0) * (HEIGHT - MARGIN_T - MARGIN_B)

    def line(self, x, y, color, label=None, width=1.5, dash=None):
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(self._x(x), self._y(y)))
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        self.elements.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="{width}"{dash_attr} points="{pts}"/>')
        if label:
            self.legend.append((label, color))

    def circle(self, center, radius, color, fill="none"):
        r = radius / (self.xlim[1] - self.xlim[0]) * (WIDTH - MARGIN_L - MARGIN_R)
        self.elements.append(
            f'<circle cx="{_fmt(self._x(center[0]))}" cy="{_fmt(self._y(center[1]))}" '
            f'r="{_fmt(r)}" stroke="{color}" fill="{fill}"/>')

    def rect(self, lo, hi, color, fill="none"):
        x0, x1 = self._x(lo[0]), self._x(hi[0])
        y0, y1 = self._y(hi[1]), self._y(lo[1])
        self.elements.append(
            f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" width="{_fmt(x1 - x0)}" height="{_fmt(y1 - y0)}" '
            f'stroke="{color}" fill="{fill}"/>')

    def marker(self, xy, color, size=5):
        self.elements.append(
            f'<circle cx="{_fmt(self._x(xy[0]))}" cy="{_fmt(self._y(xy[1]))}" r="{size}" fill="{color}"/>')

    def annotate(self, xy, text, color="#333333"):
        self.elements.append(
            f'<text x="{_fmt(self._x(xy[0]) + 6)}" y="{_fmt(self._y(xy[1]) - 6)}" '
            f'font-size="12" fill="{color}">{text}</text>')

    def render(self) -> str:
        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}">',
            f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        ]
        x0, y0 = MARGIN_L, HEIGHT - MARGIN_B
        x1, y1 = WIDTH - MARGIN_R, MARGIN_T
        out.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>')
        out.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>')
        for t in _ticks(*self.xlim):
            px = float(self._x(t))
            if x0 - 1 <= px <= x1 + 1:
                out.append(f'<line x1="{_fmt(px)}" y1="{y0}" x2="{_fmt(px)}" y2="{y0 + 5}" stroke="black"/>')
                out.append(f'<text x="{_fmt(px)}" y="{y0 + 20}" font-size="11" text-anchor="middle">{_fmt(t)}</text>')
        for t in _ticks(*self.ylim):
            py = float(self._y(t))
            if y1 - 1 <= py <= y0 + 1:
                out.append(f'<line x1="{x0 - 5}" y1="{_fmt(py)}" x2="{x0}" y2="{_fmt(py)}" stroke="black"/>')
                out.append(f'<text x="{x0 - 8}" y="{_fmt(py + 4)}" font-size="11" text-anchor="end">{_fmt(t)}</text>')
        if self.title:
            out.append(f'<text x="{WIDTH / 2}" y="22" font-size="15" text-anchor="middle">{self.title}</text>')
        if self.xlabel:
            out.append(f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 12}" font-size="12" text-anchor="middle">{self.xlabel}</text>')
        if self.ylabel:
            out.append(f'<text x="16" y="{(y0 + y1) / 2}" font-size="12" text-anchor="middle" '
                       f'transform="rotate(-90 16 {(y0 + y1) / 2})">{self.ylabel}</text>')
        out.extend(self.elements)
        for i, (label, color) in enumerate(self.legend):
            ly = MARGIN_T + 14 + 18 * i
            out.append(f'<line x1="{x1 - 150}" y1="{ly - 4}" x2="{x1 - 122}" y2="{ly - 4}" '
                       f'stroke="{color}" stroke-width="2"/>')
            out.append(f'<text x="{x1 - 116}" y="{ly}" font-size="12">{label}</text>')
        out.append("</svg>")
        return "\n".join(out)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.render())


def data_limits(*arrays, pad=0.05):
    lo = min(float(np.min(a)) for a in arrays if len(a))
    hi = max(float(np.max(a)) for a in arrays if len(a))
    span = hi - lo if hi > lo else 1.0
    return lo - pad * span, hi + pad * span
