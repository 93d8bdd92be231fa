"""Minimal SVG polyline plots (no rendering dependencies)."""

from __future__ import annotations

import numpy as np

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
            "#8c564b", "#17becf", "#7f7f7f"]


def _fmt(x: float) -> str:
    return "%.4f" % x


def svg_plot(outline: np.ndarray, polylines, out_path: str,
             size: int = 640, stroke: float = 2.0) -> None:
    """Write an SVG with the domain outline and a list of (points, label)."""
    pts_all = [np.atleast_2d(outline)[:, :2]]
    for pl, _ in polylines:
        pts_all.append(np.atleast_2d(pl)[:, :2])
    allp = np.vstack(pts_all)
    lo = allp.min(axis=0)
    hi = allp.max(axis=0)
    span = max(float((hi - lo).max()), 1e-9)
    pad = 0.06 * span

    def tx(p):
        x = (p[:, 0] - lo[0] + pad) / (span + 2 * pad) * size
        y = size - (p[:, 1] - lo[1] + pad) / (span + 2 * pad) * size
        return x, y

    def poly(p, color, width, closed=False):
        x, y = tx(np.atleast_2d(p)[:, :2])
        d = " ".join("%s,%s" % (_fmt(a), _fmt(b)) for a, b in zip(x, y))
        tag = "polygon" if closed else "polyline"
        return ('<%s points="%s" fill="none" stroke="%s" stroke-width="%s"/>'
                % (tag, d, color, _fmt(width)))

    lines = ['<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
             'viewBox="0 0 %d %d">' % (size, size, size, size),
             '<rect width="%d" height="%d" fill="white"/>' % (size, size),
             poly(outline, "#333333", 1.5, closed=True)]
    legend = []
    for k, (pl, label) in enumerate(polylines):
        color = _PALETTE[k % len(_PALETTE)]
        lines.append(poly(pl, color, stroke))
        legend.append((label, color))
    for k, (label, color) in enumerate(legend):
        y = 18 + 16 * k
        lines.append('<rect x="8" y="%d" width="12" height="3" fill="%s"/>'
                     % (y - 4, color))
        lines.append('<text x="26" y="%d" font-size="12" '
                     'font-family="monospace">%s</text>' % (y, label))
    lines.append("</svg>")
    with open(out_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
