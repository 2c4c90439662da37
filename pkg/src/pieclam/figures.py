"""Minimal deterministic SVG emitters (no plotting dependency).

Coordinates are formatted with fixed precision so identical inputs yield
byte-identical files.
"""

from __future__ import annotations

import numpy as np


def _fmt(x):
    return f"{x:.2f}"


def _svg(width, height, body):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">\n'
            + body + "</svg>\n")


def _gray(v):
    level = int(round(255 * (1.0 - min(max(v, 0.0), 1.0))))
    return f"rgb({level},{level},{level})"


def svg_heatmap(path, matrix, vmin=None, vmax=None, size=480, title=None):
    """Grayscale heatmap; dark cells are large values."""
    m = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    lo = m.min() if vmin is None else vmin
    hi = m.max() if vmax is None else vmax
    span = hi - lo if hi > lo else 1.0
    rows, cols = m.shape
    cell = size / max(rows, cols)
    top = 24 if title else 0
    parts = [f'<rect width="{_fmt(cols * cell)}" y="{top}" '
             f'height="{_fmt(rows * cell)}" fill="white"/>\n']
    if title:
        parts.insert(0, f'<text x="4" y="16" font-size="13" '
                        f'font-family="sans-serif">{title}</text>\n')
    scaled = (m - lo) / span
    for i in range(rows):
        for j in range(cols):
            v = scaled[i, j]
            if v <= 1e-12:
                continue
            parts.append(
                f'<rect x="{_fmt(j * cell)}" y="{_fmt(top + i * cell)}" '
                f'width="{_fmt(cell)}" height="{_fmt(cell)}" fill="{_gray(v)}"/>\n')
    with open(path, "w") as fh:
        fh.write(_svg(int(cols * cell) + 1, int(rows * cell) + top + 1, "".join(parts)))


_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _axes(width, height, margin):
    return (f'<rect width="{width}" height="{height}" fill="white"/>\n'
            f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
            f'y2="{height - margin}" stroke="black"/>\n'
            f'<line x1="{margin}" y1="{margin}" x2="{margin}" '
            f'y2="{height - margin}" stroke="black"/>\n')


def _spans(values):
    lo = min(float(np.min(v)) for v in values)
    hi = max(float(np.max(v)) for v in values)
    if hi <= lo:
        hi = lo + 1.0
    return lo, hi


def _tick_labels(width, height, margin, xlim, ylim):
    return (
        f'<text x="{margin}" y="{height - margin + 16}" font-size="10" '
        f'font-family="sans-serif">{xlim[0]:.3g}</text>\n'
        f'<text x="{width - margin - 30}" y="{height - margin + 16}" font-size="10" '
        f'font-family="sans-serif">{xlim[1]:.3g}</text>\n'
        f'<text x="{max(margin - 38, 2)}" y="{height - margin}" font-size="10" '
        f'font-family="sans-serif">{ylim[0]:.3g}</text>\n'
        f'<text x="{max(margin - 38, 2)}" y="{margin + 4}" font-size="10" '
        f'font-family="sans-serif">{ylim[1]:.3g}</text>\n'
    )


def svg_scatter(path, x, y, groups=None, width=480, height=480, title=None):
    """Scatter plot; optional integer groups pick marker colors."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    margin = 42
    xlo, xhi = _spans([x])
    ylo, yhi = _spans([y])
    parts = [_axes(width, height, margin), _tick_labels(width, height, margin,
                                                        (xlo, xhi), (ylo, yhi))]
    if title:
        parts.append(f'<text x="{margin}" y="16" font-size="13" '
                     f'font-family="sans-serif">{title}</text>\n')
    for i in range(x.size):
        px = margin + (x[i] - xlo) / (xhi - xlo) * (width - 2 * margin)
        py = height - margin - (y[i] - ylo) / (yhi - ylo) * (height - 2 * margin)
        color = _PALETTE[int(groups[i]) % len(_PALETTE)] if groups is not None \
            else _PALETTE[0]
        parts.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="2.5" '
                     f'fill="{color}" fill-opacity="0.7"/>\n')
    with open(path, "w") as fh:
        fh.write(_svg(width, height, "".join(parts)))


def svg_line_chart(path, series, width=560, height=400, title=None,
                   xlabel=None, ylabel=None):
    """Line chart of {name: (xs, ys)} with a small text legend."""
    margin = 48
    xs_all = [np.asarray(s[0], dtype=np.float64) for s in series.values()]
    ys_all = [np.asarray(s[1], dtype=np.float64) for s in series.values()]
    xlo, xhi = _spans(xs_all)
    ylo, yhi = _spans(ys_all)
    parts = [_axes(width, height, margin), _tick_labels(width, height, margin,
                                                        (xlo, xhi), (ylo, yhi))]
    if title:
        parts.append(f'<text x="{margin}" y="16" font-size="13" '
                     f'font-family="sans-serif">{title}</text>\n')
    if xlabel:
        parts.append(f'<text x="{width // 2}" y="{height - 8}" font-size="11" '
                     f'font-family="sans-serif">{xlabel}</text>\n')
    if ylabel:
        parts.append(f'<text x="10" y="{height // 2}" font-size="11" '
                     f'font-family="sans-serif" transform="rotate(-90 10 '
                     f'{height // 2})">{ylabel}</text>\n')
    for idx, (name, (xs, ys)) in enumerate(series.items()):
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        pts = []
        for xv, yv in zip(xs, ys):
            px = margin + (xv - xlo) / (xhi - xlo) * (width - 2 * margin)
            py = height - margin - (yv - ylo) / (yhi - ylo) * (height - 2 * margin)
            pts.append(f"{_fmt(px)},{_fmt(py)}")
        color = _PALETTE[idx % len(_PALETTE)]
        parts.append(f'<polyline points="{" ".join(pts)}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"/>\n')
        parts.append(f'<text x="{width - margin - 150}" y="{margin + 14 * (idx + 1)}" '
                     f'font-size="11" font-family="sans-serif" fill="{color}">'
                     f'{name}</text>\n')
    with open(path, "w") as fh:
        fh.write(_svg(width, height, "".join(parts)))


def svg_density_heatmap(path, density_fn, xlim, ylim, grid=120, size=480,
                        title=None):
    """Heatmap of a 2-D density over a box, evaluated on a grid of cell centers."""
    xs = np.linspace(xlim[0], xlim[1], grid)
    ys = np.linspace(ylim[0], ylim[1], grid)
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.reshape(-1), gy.reshape(-1)])
    vals = np.asarray(density_fn(pts), dtype=np.float64).reshape(grid, grid)
    svg_heatmap(path, vals[::-1], size=size, title=title)
