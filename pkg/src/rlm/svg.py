"""Minimal single-series SVG line charts for convergence traces."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

from .trace import IterRecord

WIDTH, HEIGHT = 640, 400
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 30, 50

_ALIASES = {"iter": "k", "lambda": "lam"}


def _column(trace: Sequence, name: str) -> list[float]:
    key = _ALIASES.get(name, name)
    out = []
    for r in trace:
        v = getattr(r, key) if isinstance(r, IterRecord) else r[key]
        out.append(float(v))
    return out


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def render_svg(trace: Sequence, y_column: str = "f", x_column: str = "iter") -> str:
    """SVG text for ``y_column`` against ``x_column`` (log10 y-axis when all y > 0)."""
    if not trace:
        raise ValueError("empty trace")
    xs = _column(trace, x_column)
    ys = _column(trace, y_column)
    log_scale = all(y > 0 and math.isfinite(y) for y in ys)
    warning = None
    if log_scale:
        ty = [math.log10(y) for y in ys]
    else:
        ty = [y if math.isfinite(y) else 0.0 for y in ys]
        warning = f"non-positive {y_column} values: linear y-axis"
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ty), max(ty)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def px(v):
        return MARGIN_L + (v - x0) / (x1 - x0) * pw

    def py(v):
        return MARGIN_T + (y1 - v) / (y1 - y0) * ph

    pts = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(xs, ty))
    ylabel = f"log10 {y_column}" if log_scale else y_column
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{MARGIN_L}" y1="{MARGIN_T + ph}" x2="{MARGIN_L + pw}" y2="{MARGIN_T + ph}" stroke="black"/>',
        f'<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" y2="{MARGIN_T + ph}" stroke="black"/>',
    ]
    for frac in (0.0, 0.5, 1.0):
        yv = y0 + frac * (y1 - y0)
        xv = x0 + frac * (x1 - x0)
        lines.append(
            f'<text x="{MARGIN_L - 6}" y="{_fmt(py(yv) + 4)}" font-size="11" text-anchor="end">{yv:.3g}</text>'
        )
        lines.append(
            f'<text x="{_fmt(px(xv))}" y="{MARGIN_T + ph + 16}" font-size="11" text-anchor="middle">{xv:.4g}</text>'
        )
    lines.append(
        f'<text x="{MARGIN_L + pw / 2:.1f}" y="{HEIGHT - 10}" font-size="12" text-anchor="middle">{x_column}</text>'
    )
    lines.append(
        f'<text x="14" y="{MARGIN_T + ph / 2:.1f}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 14 {MARGIN_T + ph / 2:.1f})">{ylabel}</text>'
    )
    if warning:
        lines.append(f'<text class="warning" x="{MARGIN_L + 4}" y="{MARGIN_T - 10}" font-size="11" fill="red">{warning}</text>')
    lines.append(f'<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{pts}"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def emit_svg(trace: Sequence, y_column: str, path: str | Path, x_column: str = "iter") -> Path:
    path = Path(path)
    path.write_text(render_svg(trace, y_column, x_column))
    return path
