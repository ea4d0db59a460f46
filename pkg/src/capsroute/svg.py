"""Hand-emitted SVG line and scatter plots; no plotting dependency."""

from __future__ import annotations

from typing import Mapping, Sequence

PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)

_MARGIN = 56.0


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _bounds(lo: float, hi: float) -> tuple[float, float]:
    if hi <= lo:
        pad = 1.0 if lo == 0.0 else abs(lo) * 0.1
        return lo - pad, lo + pad
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


class _Canvas:
    def __init__(self, width: float, height: float, title: str):
        self.width = width
        self.height = height
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:g}" '
            f'height="{height:g}" viewBox="0 0 {width:g} {height:g}">',
            f'<rect width="{width:g}" height="{height:g}" fill="white"/>',
            f'<text x="{width / 2:g}" y="20" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{title}</text>',
        ]

    def map_x(self, x: float, x0: float, x1: float) -> float:
        return _MARGIN + (x - x0) / (x1 - x0) * (self.width - 2 * _MARGIN)

    def map_y(self, y: float, y0: float, y1: float) -> float:
        return self.height - _MARGIN - (y - y0) / (y1 - y0) * (self.height - 2 * _MARGIN)

    def axes(self, x0: float, x1: float, y0: float, y1: float):
        left, right = _MARGIN, self.width - _MARGIN
        top, bottom = _MARGIN, self.height - _MARGIN
        self.parts.append(
            f'<path d="M {left:g} {top:g} L {left:g} {bottom:g} L {right:g} {bottom:g}" '
            'fill="none" stroke="#333" stroke-width="1"/>'
        )
        for val, px in ((x0, left), (x1, right)):
            self.parts.append(
                f'<text x="{px:g}" y="{bottom + 18:g}" text-anchor="middle" '
                f'font-family="sans-serif" font-size="11">{val:.3g}</text>'
            )
        for val, py in ((y0, bottom), (y1, top)):
            self.parts.append(
                f'<text x="{left - 6:g}" y="{py + 4:g}" text-anchor="end" '
                f'font-family="sans-serif" font-size="11">{val:.3g}</text>'
            )

    def legend(self, entries: Sequence[tuple[str, str]]):
        x = self.width - _MARGIN + 4
        for k, (label, color) in enumerate(entries):
            y = _MARGIN + 14 * k
            self.parts.append(
                f'<circle cx="{x:g}" cy="{y - 3:g}" r="3" fill="{color}"/>'
            )
            self.parts.append(
                f'<text x="{x + 7:g}" y="{y:g}" font-family="sans-serif" '
                f'font-size="10">{label}</text>'
            )

    def finish(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def line_plot_svg(series: Mapping[str, Sequence[float]], title: str = "",
                  width: float = 720.0, height: float = 440.0) -> str:
    """Polyline plot of named series against their index."""
    if not series:
        raise ValueError("no series to plot")
    xs_max = max(len(v) - 1 for v in series.values())
    ys = [y for v in series.values() for y in v]
    x0, x1 = _bounds(0.0, float(max(xs_max, 1)))
    y0, y1 = _bounds(min(ys), max(ys))
    canvas = _Canvas(width, height, title)
    canvas.axes(x0, x1, y0, y1)
    legend = []
    for k, (name, values) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(
            f"{_fmt(canvas.map_x(float(i), x0, x1))},{_fmt(canvas.map_y(float(y), y0, y1))}"
            for i, y in enumerate(values)
        )
        canvas.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        legend.append((name, color))
    canvas.legend(legend)
    return canvas.finish()


def scatter_plot_svg(clouds: Sequence[tuple[str, Sequence[Sequence[float]]]],
                     marks: Sequence[tuple[str, Sequence[float]]] = (),
                     title: str = "", width: float = 560.0,
                     height: float = 560.0) -> str:
    """Scatter of labelled 2-D point clouds with starred marker points."""
    all_pts = [p for _, pts in clouds for p in pts] + [p for _, p in marks]
    if not all_pts:
        raise ValueError("no points to plot")
    x0, x1 = _bounds(min(p[0] for p in all_pts), max(p[0] for p in all_pts))
    y0, y1 = _bounds(min(p[1] for p in all_pts), max(p[1] for p in all_pts))
    canvas = _Canvas(width, height, title)
    canvas.axes(x0, x1, y0, y1)
    legend = []
    for k, (label, pts) in enumerate(clouds):
        color = PALETTE[k % len(PALETTE)]
        for p in pts:
            cx = _fmt(canvas.map_x(float(p[0]), x0, x1))
            cy = _fmt(canvas.map_y(float(p[1]), y0, y1))
            canvas.parts.append(
                f'<circle cx="{cx}" cy="{cy}" r="3" fill="none" '
                f'stroke="{color}" stroke-width="1"/>'
            )
        legend.append((label, color))
    for k, (label, p) in enumerate(marks):
        color = PALETTE[k % len(PALETTE)]
        cx = canvas.map_x(float(p[0]), x0, x1)
        cy = canvas.map_y(float(p[1]), y0, y1)
        for dx, dy in ((5, 0), (0, 5), (3.5, 3.5), (3.5, -3.5)):
            canvas.parts.append(
                f'<line x1="{_fmt(cx - dx)}" y1="{_fmt(cy - dy)}" '
                f'x2="{_fmt(cx + dx)}" y2="{_fmt(cy + dy)}" '
                f'stroke="{color}" stroke-width="2"/>'
            )
    canvas.legend(legend)
    return canvas.finish()
