"""Tiny deterministic SVG plot writer (no plotting dependencies).

All coordinates and colours are formatted with fixed precision so that the
same inputs always produce byte-identical files.
"""

from __future__ import annotations

from typing import List, Sequence, Tuple

_FONT = 'font-family="monospace" font-size="11"'

# Qualitative palette; cycled when there are more classes than entries.
PALETTE = ["#1b6ca8", "#d1495b", "#3d9970", "#f2a104", "#7f4ca5",
           "#4d4d4d", "#17becf", "#8c564b", "#bcbd22", "#e377c2"]


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _esc(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
            .replace('"', "&quot;"))


def _svg(width: float, height: float, body: List[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" '
            f'height="{_fmt(height)}" viewBox="0 0 {_fmt(width)} {_fmt(height)}">')
    return "\n".join([head, *body, "</svg>"]) + "\n"


def _gray(value: float, vmax: float) -> str:
    frac = 0.0 if vmax <= 0 else min(max(value / vmax, 0.0), 1.0)
    level = int(round(255 * (1.0 - frac)))
    return f"#{level:02x}{level:02x}{level:02x}"


def heatmap(row_labels: Sequence[str], col_labels: Sequence[str],
            counts: Sequence[Sequence[float]], title: str = "") -> str:
    """Grid heatmap with per-cell counts; rows = true, columns = predicted."""
    cell = 34.0
    left, top = 150.0, 60.0
    width = left + cell * len(col_labels) + 20.0
    height = top + cell * len(row_labels) + 120.0
    vmax = max((float(v) for row in counts for v in row), default=0.0)
    body: List[str] = []
    if title:
        body.append(f'<text x="{_fmt(left)}" y="20" {_FONT}>{_esc(title)}</text>')
    for i, row in enumerate(counts):
        y = top + i * cell
        body.append(f'<text x="{_fmt(left - 6)}" y="{_fmt(y + cell / 2 + 4)}" '
                    f'text-anchor="end" {_FONT}>{_esc(str(row_labels[i]))}</text>')
        for j, value in enumerate(row):
            x = left + j * cell
            fill = _gray(float(value), vmax)
            text_fill = "#000000" if vmax <= 0 or value / vmax < 0.5 else "#ffffff"
            body.append(f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(cell)}" '
                        f'height="{_fmt(cell)}" fill="{fill}" stroke="#999999"/>')
            body.append(f'<text x="{_fmt(x + cell / 2)}" y="{_fmt(y + cell / 2 + 4)}" '
                        f'text-anchor="middle" fill="{text_fill}" {_FONT}>'
                        f'{_esc(str(int(value)))}</text>')
    for j, label in enumerate(col_labels):
        x = left + j * cell + cell / 2
        y = top + cell * len(row_labels) + 12
        body.append(f'<text x="{_fmt(x)}" y="{_fmt(y)}" text-anchor="end" '
                    f'transform="rotate(-60 {_fmt(x)} {_fmt(y)})" {_FONT}>'
                    f'{_esc(str(label))}</text>')
    return _svg(width, height, body)


def scatter(points: Sequence[Tuple[float, float, str]], title: str = "") -> str:
    """2-d scatter; point colour is assigned per distinct label (sorted)."""
    size = 420.0
    pad = 50.0
    labels = sorted({p[2] for p in points})
    colour = {lab: PALETTE[i % len(PALETTE)] for i, lab in enumerate(labels)}
    xs = [p[0] for p in points] or [0.0]
    ys = [p[1] for p in points] or [0.0]
    xmin, xmax = min(xs), max(xs)
    ymin, ymax = min(ys), max(ys)
    xspan = (xmax - xmin) or 1.0
    yspan = (ymax - ymin) or 1.0

    def sx(x: float) -> float:
        return pad + (x - xmin) / xspan * (size - 2 * pad)

    def sy(y: float) -> float:
        return size - pad - (y - ymin) / yspan * (size - 2 * pad)

    body: List[str] = []
    if title:
        body.append(f'<text x="{_fmt(pad)}" y="20" {_FONT}>{_esc(title)}</text>')
    body.append(f'<rect x="{_fmt(pad)}" y="{_fmt(pad)}" width="{_fmt(size - 2 * pad)}" '
                f'height="{_fmt(size - 2 * pad)}" fill="none" stroke="#cccccc"/>')
    for x, y, lab in points:
        body.append(f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="3.00" '
                    f'fill="{colour[lab]}" fill-opacity="0.75"/>')
    legend_x = size + 10.0
    for i, lab in enumerate(labels):
        y = pad + i * 16.0
        body.append(f'<circle cx="{_fmt(legend_x)}" cy="{_fmt(y)}" r="4.00" '
                    f'fill="{colour[lab]}"/>')
        body.append(f'<text x="{_fmt(legend_x + 10)}" y="{_fmt(y + 4)}" {_FONT}>'
                    f'{_esc(lab)}</text>')
    width = size + 160.0
    return _svg(width, size, body)


def bars(labels: Sequence[str], values: Sequence[float], title: str = "",
         value_fmt: str = "{:.2f}") -> str:
    """Horizontal bar chart (used for error-category breakdowns)."""
    bar_h = 22.0
    left = 150.0
    top = 40.0
    width = 520.0
    height = top + bar_h * len(labels) + 30.0
    vmax = max([abs(float(v)) for v in values], default=0.0) or 1.0
    body: List[str] = []
    if title:
        body.append(f'<text x="{_fmt(left)}" y="20" {_FONT}>{_esc(title)}</text>')
    for i, (label, value) in enumerate(zip(labels, values)):
        y = top + i * bar_h
        w = abs(float(value)) / vmax * (width - left - 90.0)
        body.append(f'<text x="{_fmt(left - 6)}" y="{_fmt(y + bar_h / 2 + 4)}" '
                    f'text-anchor="end" {_FONT}>{_esc(str(label))}</text>')
        body.append(f'<rect x="{_fmt(left)}" y="{_fmt(y + 3)}" width="{_fmt(w)}" '
                    f'height="{_fmt(bar_h - 6)}" fill="#1b6ca8"/>')
        body.append(f'<text x="{_fmt(left + w + 6)}" y="{_fmt(y + bar_h / 2 + 4)}" '
                    f'{_FONT}>{_esc(value_fmt.format(float(value)))}</text>')
    return _svg(width, height, body)
