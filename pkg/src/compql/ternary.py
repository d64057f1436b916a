"""Ternary (simplex) diagrams written directly as SVG.

Vertex order follows column order: part 1 at (0, 0), part 2 at (1, 0) and
part 3 at (0.5, sqrt(3)/2).  The output contains no timestamps and all
numbers are printed with fixed precision, so identical inputs give
byte-identical files.
"""

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .errors import DataError, InvalidDimensionError

SQRT3_2 = math.sqrt(3.0) / 2.0


@dataclass(frozen=True)
class TernaryPoint:
    x: float
    y: float


def ternary_coords(p):
    """Plane coordinates of a 3-part composition (or an (n, 3) array of them)."""
    p = np.asarray(getattr(p, "parts", p), dtype=float)
    if p.shape[-1] != 3:
        raise InvalidDimensionError(f"ternary coordinates need D = 3, got D = {p.shape[-1]}")
    if np.any(np.abs(p.sum(axis=-1) - 1.0) > 1e-8) or np.any(p < 0):
        raise DataError("ternary coordinates need nonnegative unit-sum compositions")
    x = p[..., 1] + 0.5 * p[..., 2]
    y = SQRT3_2 * p[..., 2]
    if p.ndim == 1:
        return TernaryPoint(float(x), float(y))
    return np.column_stack([x, y])


def gradient_color(t):
    """Blue (t = 0) to red (t = 1) as ``#rrggbb``."""
    t = min(max(float(t), 0.0), 1.0)
    r = round(255 * t)
    b = round(255 * (1 - t))
    return f"#{r:02x}00{b:02x}"


@dataclass
class Curve:
    compositions: np.ndarray
    label: str
    dashed: bool = False


class TernarySVG:
    """Accumulates points and curves, then renders one SVG document."""

    def __init__(self, labels=("1", "2", "3"), size=520, margin=60, title=None):
        self.labels = tuple(labels)
        self.size = size
        self.margin = margin
        self.title = title
        self.points = []  # (x, y, color)
        self.curves = []
        self.notes = []

    def _px(self, x, y):
        w = self.size - 2 * self.margin
        return self.margin + x * w, self.margin + (SQRT3_2 - y) * w

    def add_points(self, compositions, values=None):
        xy = ternary_coords(np.atleast_2d(compositions))
        if values is None:
            colors = ["#000000"] * len(xy)
        else:
            v = np.asarray(values, dtype=float)
            span = v.max() - v.min()
            t = (v - v.min()) / span if span > 0 else np.zeros_like(v)
            colors = [gradient_color(ti) for ti in t]
        self.points.extend((float(x), float(y), c) for (x, y), c in zip(xy, colors))

    def add_curve(self, compositions, label, dashed=False):
        self.curves.append(Curve(np.atleast_2d(compositions), label, dashed))

    def add_note(self, text):
        self.notes.append(text)

    def render(self):
        height = self.size - 2 * self.margin
        total_h = int(self.margin * 2 + SQRT3_2 * height + 30 + 18 * (len(self.curves) + len(self.notes)))
        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.size}" height="{total_h}" '
            f'viewBox="0 0 {self.size} {total_h}">',
            '<rect width="100%" height="100%" fill="white"/>',
        ]
        if self.title:
            out.append(f'<text x="{self.size / 2:.2f}" y="20" text-anchor="middle" '
                       f'font-family="sans-serif" font-size="14">{escape(self.title)}</text>')
        corners = [self._px(0, 0), self._px(1, 0), self._px(0.5, SQRT3_2)]
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in corners)
        out.append(f'<polygon class="frame" points="{pts}" fill="none" stroke="#444" stroke-width="1.5"/>')
        anchors = [("end", 18, -6), ("start", 18, 6), ("middle", -10, 0)]
        for (x, y), label, (anchor, dy, dx) in zip(corners, self.labels, anchors):
            out.append(f'<text class="vertex-label" x="{x + dx:.2f}" y="{y + dy:.2f}" text-anchor="{anchor}" '
                       f'font-family="sans-serif" font-size="13">{escape(label)}</text>')
        for c in self.curves:
            xy = ternary_coords(c.compositions)
            path = " ".join(f"{x:.3f},{y:.3f}" for x, y in (self._px(a, b) for a, b in xy))
            dash = ' stroke-dasharray="6,4"' if c.dashed else ""
            kind = "curve-dashed" if c.dashed else "curve-solid"
            out.append(f'<polyline class="{kind}" points="{path}" fill="none" stroke="#222" '
                       f'stroke-width="2"{dash}/>')
        for x, y, color in self.points:
            px, py = self._px(x, y)
            out.append(f'<circle class="data-point" cx="{px:.3f}" cy="{py:.3f}" r="3.5" '
                       f'fill="{color}" stroke="none"/>')
        ly = self.margin + SQRT3_2 * height + 40
        for c in self.curves:
            dash = ' stroke-dasharray="6,4"' if c.dashed else ""
            out.append(f'<line x1="{self.margin}" y1="{ly - 4:.2f}" x2="{self.margin + 30}" y2="{ly - 4:.2f}" '
                       f'stroke="#222" stroke-width="2"{dash}/>')
            out.append(f'<text class="legend" x="{self.margin + 38}" y="{ly:.2f}" font-family="sans-serif" '
                       f'font-size="12">{escape(c.label)}</text>')
            ly += 18
        for note in self.notes:
            out.append(f'<text class="legend-note" x="{self.margin}" y="{ly:.2f}" font-family="sans-serif" '
                       f'font-size="12" fill="#555">{escape(note)}</text>')
            ly += 18
        out.append("</svg>")
        return "\n".join(out) + "\n"
