"""Deterministic CSV, JSON and SVG writers.

Every writer produces byte-identical output for identical inputs: CSV cells
use 17 significant digits, JSON keys are sorted, and SVG markup carries no
timestamps or random ids.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["format_number", "write_csv", "write_json", "dumps_json", "heatmap_svg", "write_text"]


def format_number(v) -> str:
    if isinstance(v, str):
        return v
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.17g}"


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def write_csv(path, header, rows) -> Path:
    lines = [",".join(header)]
    lines += [",".join(format_number(v) for v in row) for row in rows]
    return write_text(path, "\n".join(lines) + "\n")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        # JSON has no inf/nan; keep them readable as strings
        return v if math.isfinite(v) else format_number(v)
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> Path:
    return write_text(path, dumps_json(obj))


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def heatmap_svg(categories, xs, ys, colors: dict, *, labels: dict | None = None, title: str = "",
                x_label: str = "", y_label: str = "", curves=(), panels=None,
                cell: float = 3.0) -> str:
    """Categorical heatmap(s) as a self-contained SVG document.

    ``categories`` is a 2-D integer array indexed ``[iy, ix]`` (or a list of
    such arrays when ``panels`` gives one caption per array).  Runs of equal
    cells within a row are merged into a single rectangle.  ``curves`` is a
    list of ``(xs, ys, color)`` polylines in data coordinates drawn on every
    panel.
    """
    grids = list(categories) if panels is not None else [categories]
    captions = list(panels) if panels is not None else [""]
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    ny, nx = np.asarray(grids[0]).shape
    w, h = nx * cell, ny * cell
    margin_l, margin_t, gap = 60.0, 40.0, 30.0
    legend_h = 24.0
    width = margin_l + len(grids) * (w + gap) + 10
    height = margin_t + h + 50 + legend_h
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(width)}" height="{_fmt(height)}" '
        f'viewBox="0 0 {_fmt(width)} {_fmt(height)}" font-family="sans-serif" font-size="11">',
        '<rect width="100%" height="100%" fill="#ffffff"/>',
    ]
    if title:
        out.append(f'<text x="{_fmt(margin_l)}" y="18" font-size="13">{escape(title)}</text>')

    def to_px(x0, xv, yv):
        px = x0 + (xv - xs[0]) / (xs[-1] - xs[0]) * w
        py = margin_t + h - (yv - ys[0]) / (ys[-1] - ys[0]) * h
        return px, py

    for k, (grid, cap) in enumerate(zip(grids, captions)):
        grid = np.asarray(grid)
        x0 = margin_l + k * (w + gap)
        out.append('<g>')
        for iy in range(ny):
            row = grid[iy]
            y = margin_t + h - (iy + 1) * cell
            start = 0
            for ix in range(1, nx + 1):
                if ix == nx or row[ix] != row[start]:
                    color = colors[int(row[start])]
                    out.append(
                        f'<rect x="{_fmt(x0 + start * cell)}" y="{_fmt(y)}" '
                        f'width="{_fmt((ix - start) * cell)}" height="{_fmt(cell)}" fill="{color}"/>'
                    )
                    start = ix
        for cx, cy, ccol in curves:
            pts = [to_px(x0, a, b) for a, b in zip(cx, cy)
                   if xs[0] <= a <= xs[-1] and ys[0] <= b <= ys[-1]]
            if len(pts) > 1:
                path = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in pts)
                out.append(f'<polyline points="{path}" fill="none" stroke="{ccol}" stroke-width="1.5"/>')
        out.append(f'<rect x="{_fmt(x0)}" y="{_fmt(margin_t)}" width="{_fmt(w)}" height="{_fmt(h)}" '
                   f'fill="none" stroke="#000000"/>')
        if cap:
            out.append(f'<text x="{_fmt(x0)}" y="{_fmt(margin_t - 6)}">{escape(cap)}</text>')
        out.append(f'<text x="{_fmt(x0)}" y="{_fmt(margin_t + h + 14)}">{_fmt(xs[0])}</text>')
        out.append(f'<text x="{_fmt(x0 + w)}" y="{_fmt(margin_t + h + 14)}" '
                   f'text-anchor="end">{_fmt(xs[-1])}</text>')
        if x_label:
            out.append(f'<text x="{_fmt(x0 + w / 2)}" y="{_fmt(margin_t + h + 14)}" '
                       f'text-anchor="middle">{escape(x_label)}</text>')
        out.append('</g>')
    out.append(f'<text x="{_fmt(margin_l - 4)}" y="{_fmt(margin_t + h)}" text-anchor="end">{_fmt(ys[0])}</text>')
    out.append(f'<text x="{_fmt(margin_l - 4)}" y="{_fmt(margin_t + 10)}" text-anchor="end">{_fmt(ys[-1])}</text>')
    if y_label:
        out.append(f'<text x="{_fmt(margin_l - 4)}" y="{_fmt(margin_t + h / 2)}" '
                   f'text-anchor="end">{escape(y_label)}</text>')
    if labels:
        lx = margin_l
        ly = margin_t + h + 30
        for key in sorted(labels):
            out.append(f'<rect x="{_fmt(lx)}" y="{_fmt(ly)}" width="12" height="12" '
                       f'fill="{colors[key]}" stroke="#000000"/>')
            out.append(f'<text x="{_fmt(lx + 16)}" y="{_fmt(ly + 10)}">{escape(labels[key])}</text>')
            lx += 30 + 7 * len(labels[key])
    out.append("</svg>")
    return "\n".join(out) + "\n"
