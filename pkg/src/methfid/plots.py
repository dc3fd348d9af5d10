"""Minimal standalone SVG renderings of posterior histograms and scatter plots.

The CSV files written next to them carry the same data for external
plotting; these are for a quick look without extra dependencies.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

__all__ = ["histogram_svg", "scatter_svg"]

W, H = 480, 360
PAD_L, PAD_R, PAD_T, PAD_B = 60, 20, 30, 45


def _frame(title: str, xlabel: str, ylabel: str, xr, yr) -> list[str]:
    x0, x1 = xr
    y0, y1 = yr
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<line x1="{PAD_L}" y1="{H - PAD_B}" x2="{W - PAD_R}" y2="{H - PAD_B}" stroke="black"/>',
        f'<line x1="{PAD_L}" y1="{PAD_T}" x2="{PAD_L}" y2="{H - PAD_B}" stroke="black"/>',
        f'<text x="{(PAD_L + W - PAD_R) / 2:.1f}" y="{H - 8}" text-anchor="middle">'
        f'{escape(xlabel)}</text>',
        f'<text x="14" y="{(PAD_T + H - PAD_B) / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 14 {(PAD_T + H - PAD_B) / 2:.1f})">{escape(ylabel)}</text>',
    ]
    for v in np.linspace(x0, x1, 5):
        px = _sx(v, xr)
        parts.append(f'<text x="{px:.1f}" y="{H - PAD_B + 14}" text-anchor="middle">{v:.3g}</text>')
    for v in np.linspace(y0, y1, 5):
        py = _sy(v, yr)
        parts.append(f'<text x="{PAD_L - 4}" y="{py + 4:.1f}" text-anchor="end">{v:.3g}</text>')
    return parts


def _sx(v, xr):
    return PAD_L + (v - xr[0]) / (xr[1] - xr[0]) * (W - PAD_L - PAD_R)


def _sy(v, yr):
    return H - PAD_B - (v - yr[0]) / (yr[1] - yr[0]) * (H - PAD_T - PAD_B)


def _range(v):
    lo, hi = float(np.min(v)), float(np.max(v))
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    return lo, hi


def histogram_svg(values, title: str = "", xlabel: str = "", bins: int = 30,
                  marker: float | None = None) -> str:
    """Density histogram; ``marker`` draws a vertical reference line."""
    values = np.asarray(values, dtype=float)
    counts, edges = np.histogram(values, bins=bins, density=True)
    xr = (float(edges[0]), float(edges[-1]))
    yr = (0.0, float(counts.max()) * 1.05 or 1.0)
    parts = _frame(title, xlabel, "density", xr, yr)
    for c, a, b in zip(counts, edges[:-1], edges[1:]):
        x, x2, y = _sx(a, xr), _sx(b, xr), _sy(c, yr)
        parts.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{x2 - x:.2f}" '
                     f'height="{H - PAD_B - y:.2f}" fill="#7a9cc6" stroke="white" stroke-width="0.5"/>')
    if marker is not None and xr[0] <= marker <= xr[1]:
        px = _sx(marker, xr)
        parts.append(f'<line x1="{px:.2f}" y1="{PAD_T}" x2="{px:.2f}" y2="{H - PAD_B}" '
                     'stroke="red" stroke-dasharray="4 3"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def scatter_svg(x, y, title: str = "", xlabel: str = "", ylabel: str = "",
                lines: dict | None = None, max_points: int = 4000) -> str:
    """Scatter of paired draws.

    ``lines`` maps a legend label to a callable ``f(x)`` drawn across the
    x range, for fitted or reference curves.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size > max_points:
        keep = np.linspace(0, x.size - 1, max_points).astype(int)
        x, y = x[keep], y[keep]
    xr, yr = _range(x), _range(y)
    parts = _frame(title, xlabel, ylabel, xr, yr)
    for a, b in zip(x, y):
        parts.append(f'<circle cx="{_sx(a, xr):.2f}" cy="{_sy(b, yr):.2f}" r="1.3" '
                     'fill="#30598a" fill-opacity="0.4"/>')
    colours = ("red", "darkorange", "green")
    for k, (label, fn) in enumerate((lines or {}).items()):
        grid = np.linspace(xr[0], xr[1], 100)
        vals = np.asarray(fn(grid), dtype=float)
        ok = np.isfinite(vals) & (vals >= yr[0]) & (vals <= yr[1])
        if ok.sum() < 2:
            continue
        pts = " ".join(f"{_sx(a, xr):.2f},{_sy(b, yr):.2f}" for a, b in zip(grid[ok], vals[ok]))
        col = colours[k % len(colours)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{col}" stroke-width="1.5"/>')
        parts.append(f'<text x="{W - PAD_R - 4}" y="{PAD_T + 14 * (k + 1)}" text-anchor="end" '
                     f'fill="{col}">{escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
