"""Minimal self-contained SVG line plots of the CSV artifacts."""

from __future__ import annotations

import math
from pathlib import Path

from .io import atomic_write_text, read_csv

# kind -> (x column, y column, log y)
KINDS = {
    "rn": ("delta[J]", "R_n[1]", True),
    "gaps": ("delta[J]", "g_1[1]", True),
    "lambda1": ("delta[J]", "lambda1[1/step]", True),
    "dynamics": ("t[1/J]", "N_R[1]", False),
    "dynamics_summary": ("delta[J]", "N_R[1]", False),
    "trajectory": ("delta[J]", "mean_C[1]", False),
    "singleshot": ("delta[J]", "npnq[1]", False),
    "transition": ("n_sites[1]", "delta_star[J]", False),
}

W, H, PAD = 480, 320, 50


class SchemaError(ValueError):
    pass


def _ticks(lo: float, hi: float) -> list[float]:
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * i / 4 for i in range(5)]


def render_svg(xs, ys, *, xlabel: str, ylabel: str, log_y: bool = False,
               floor: float = 1e-300, title: str = "") -> str:
    """One polyline through ``(xs, ys)``; on a log axis values below ``floor`` are clamped."""
    clamped = False
    if log_y:
        yv = []
        for y in ys:
            if not y > floor:
                clamped = True
                y = floor
            yv.append(math.log10(y))
    else:
        yv = list(ys)
    xv = list(xs)
    x0, x1 = min(xv), max(xv)
    y0, y1 = min(yv), max(yv)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def sx(x):
        return PAD + (x - x0) / (x1 - x0) * (W - 2 * PAD)

    def sy(y):
        return H - PAD - (y - y0) / (y1 - y0) * (H - 2 * PAD)

    pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xv, yv))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD}" y2="{H - PAD}" stroke="black"/>',
        f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{H - PAD}" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        parts.append(f'<text x="{sx(t):.2f}" y="{H - PAD + 16}" font-size="10" text-anchor="middle">{t:.3g}</text>')
    for t in _ticks(y0, y1):
        label = f"1e{t:.3g}" if log_y else f"{t:.3g}"
        parts.append(f'<text x="{PAD - 4}" y="{sy(t) + 3:.2f}" font-size="10" text-anchor="end">{label}</text>')
    parts.append(f'<text x="{W / 2}" y="{H - 12}" font-size="12" text-anchor="middle">{xlabel}</text>')
    ylab = f"{ylabel} (log)" if log_y else ylabel
    parts.append(f'<text x="14" y="{H / 2}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {H / 2})">{ylab}</text>')
    if title:
        parts.append(f'<text x="{W / 2}" y="18" font-size="13" text-anchor="middle">{title}</text>')
    legend = ylabel + (f" [values below {floor:g} clamped]" if clamped else "")
    parts.append(f'<text x="{W - PAD}" y="{PAD - 8}" font-size="10" text-anchor="end">{legend}</text>')
    parts.append(f'<polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points="{pts}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def plot_csv(csv_path: str | Path, kind: str, out: str | Path | None = None,
             floor: float = 1e-300) -> Path:
    """Render ``csv_path`` as the SVG for ``kind``; raises :class:`SchemaError` on a mismatch."""
    if kind not in KINDS:
        raise SchemaError(f"unknown plot kind {kind!r}; known: {', '.join(KINDS)}")
    xcol, ycol, log_y = KINDS[kind]
    header, rows = read_csv(csv_path)
    missing = [c for c in (xcol, ycol) if c not in header]
    if missing:
        raise SchemaError(f"{csv_path} lacks column(s) {missing} required for kind {kind!r}")
    ix, iy = header.index(xcol), header.index(ycol)
    pairs = [(float(r[ix]), float(r[iy])) for r in rows if r[ix] != "" and r[iy] != ""]
    if not pairs:
        raise SchemaError(f"{csv_path} has no data rows")
    xs, ys = zip(*pairs)
    svg = render_svg(xs, ys, xlabel=xcol, ylabel=ycol, log_y=log_y, floor=floor, title=kind)
    out = Path(out) if out is not None else Path(csv_path).with_suffix(".svg")
    return atomic_write_text(out, svg)
