"""Minimal SVG charts (bars, polylines, horizontal reference lines).

Plots are presentation only; the CSV files next to them are the record.
Numbers printed in labels are formatted from the same values the CSVs hold.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from html import escape
from typing import Sequence

WIDTH, HEIGHT = 640, 400
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 20, 40, 50


@dataclass
class Chart:
    title: str
    x_label: str
    y_label: str
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    parts: list[str] = field(default_factory=list)

    def _sx(self, x: float) -> float:
        lo, hi = self.x_range
        span = hi - lo if hi > lo else 1.0
        return MARGIN_LEFT + (x - lo) / span * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)

    def _sy(self, y: float) -> float:
        lo, hi = self.y_range
        span = hi - lo if hi > lo else 1.0
        return HEIGHT - MARGIN_BOTTOM - (y - lo) / span * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)

    def bars(self, lefts: Sequence[float], rights: Sequence[float], heights: Sequence[float],
             color: str = "#4a78b5") -> None:
        base = self._sy(self.y_range[0])
        for a, b, h in zip(lefts, rights, heights):
            x0, x1, top = self._sx(a), self._sx(b), self._sy(h)
            self.parts.append(f'<rect x="{x0:.2f}" y="{top:.2f}" width="{max(x1 - x0, 0.5):.2f}" '
                              f'height="{base - top:.2f}" fill="{color}" stroke="white" stroke-width="0.5"/>')

    def polyline(self, xs: Sequence[float], ys: Sequence[float], color: str = "#1f3d7a") -> None:
        pts = " ".join(f"{self._sx(x):.2f},{self._sy(y):.2f}" for x, y in zip(xs, ys))
        self.parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.2"/>')

    def hline(self, y: float, label: str, color: str = "#c0392b") -> None:
        sy = self._sy(y)
        self.parts.append(f'<line x1="{MARGIN_LEFT}" x2="{WIDTH - MARGIN_RIGHT}" y1="{sy:.2f}" y2="{sy:.2f}" '
                          f'stroke="{color}" stroke-dasharray="6,3" stroke-width="1.5"/>')
        self.parts.append(f'<text x="{WIDTH - MARGIN_RIGHT - 4}" y="{sy - 5:.2f}" text-anchor="end" '
                          f'font-size="12" fill="{color}">{escape(label)}</text>')

    def vline(self, x: float, height: float, label: str, color: str = "#c0392b") -> None:
        sx = self._sx(x)
        self.parts.append(f'<line x1="{sx:.2f}" x2="{sx:.2f}" y1="{self._sy(0):.2f}" y2="{self._sy(height):.2f}" '
                          f'stroke="{color}" stroke-width="3"/>')
        self.parts.append(f'<text x="{sx + 6:.2f}" y="{self._sy(height) + 12:.2f}" font-size="12" '
                          f'fill="{color}">{escape(label)}</text>')

    def _axes(self) -> list[str]:
        x0, x1 = MARGIN_LEFT, WIDTH - MARGIN_RIGHT
        y0, y1 = HEIGHT - MARGIN_BOTTOM, MARGIN_TOP
        out = [f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
               f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>']
        for i in range(5):
            fx = self.x_range[0] + (self.x_range[1] - self.x_range[0]) * i / 4
            fy = self.y_range[0] + (self.y_range[1] - self.y_range[0]) * i / 4
            out.append(f'<text x="{self._sx(fx):.2f}" y="{y0 + 16}" text-anchor="middle" font-size="11">{fx:.4g}</text>')
            out.append(f'<text x="{x0 - 6}" y="{self._sy(fy) + 4:.2f}" text-anchor="end" font-size="11">{fy:.4g}</text>')
        out.append(f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 12}" text-anchor="middle" font-size="12">'
                   f'{escape(self.x_label)}</text>')
        out.append(f'<text x="16" y="{(y0 + y1) / 2}" text-anchor="middle" font-size="12" '
                   f'transform="rotate(-90 16 {(y0 + y1) / 2})">{escape(self.y_label)}</text>')
        out.append(f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="14">{escape(self.title)}</text>')
        return out

    def render(self) -> str:
        body = "\n".join(self._axes() + self.parts)
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
                f'viewBox="0 0 {WIDTH} {HEIGHT}">\n<rect width="100%" height="100%" fill="white"/>\n'
                f"{body}\n</svg>\n")
