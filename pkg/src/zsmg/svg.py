"""Hand-rolled static SVG line charts (no plotting dependency).

Output is deterministic: fixed canvas geometry, fixed palette, fixed numeric
formatting, no timestamps.  Intended for quick looks at metric CSVs, not for
publication typography.
"""

from __future__ import annotations

import math
from pathlib import Path

__all__ = ["write_line_chart"]

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_WIDTH, _HEIGHT = 880, 520
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 30, 40, 50


def _ticks_linear(lo: float, hi: float, n: int = 6) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min(s * mag for s in (1, 2, 5, 10) if s * mag >= raw)
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-12 * step:
        ticks.append(v)
        v += step
    return ticks


def _ticks_log(lo: float, hi: float) -> list[float]:
    lo_exp = math.floor(math.log10(lo))
    hi_exp = math.ceil(math.log10(hi))
    return [10.0**e for e in range(lo_exp, hi_exp + 1)]


def write_line_chart(
    path,
    series: dict[str, tuple[list[float], list[float]]],
    title: str = "",
    x_label: str = "iteration",
    y_label: str = "",
    log_y: bool = True,
) -> None:
    """Write a line chart of named (xs, ys) series to ``path`` as SVG.

    With ``log_y`` set, points with non-positive y are dropped (they have no
    logarithm); a series that loses every point is skipped.
    """
    cleaned: dict[str, tuple[list[float], list[float]]] = {}
    for name, (xs, ys) in series.items():
        pts = [(float(x), float(y)) for x, y in zip(xs, ys)
               if (not log_y or y > 0) and math.isfinite(y)]
        if pts:
            cleaned[name] = ([p[0] for p in pts], [p[1] for p in pts])
    if not cleaned:
        raise ValueError("no plottable points in any series")

    all_x = [x for xs, _ in cleaned.values() for x in xs]
    all_y = [y for _, ys in cleaned.values() for y in ys]
    x_lo, x_hi = min(all_x), max(all_x)
    y_lo, y_hi = min(all_y), max(all_y)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if log_y:
        ticks_y = _ticks_log(y_lo, y_hi)
        y_lo, y_hi = ticks_y[0], ticks_y[-1]
        to_unit_y = lambda v: (math.log10(v) - math.log10(y_lo)) / (math.log10(y_hi) - math.log10(y_lo))
    else:
        ticks_y = _ticks_linear(y_lo, y_hi)
        if y_hi == y_lo:
            y_hi = y_lo + 1.0
        to_unit_y = lambda v: (v - y_lo) / (y_hi - y_lo)
    ticks_x = _ticks_linear(x_lo, x_hi)

    plot_w = _WIDTH - _MARGIN_L - _MARGIN_R
    plot_h = _HEIGHT - _MARGIN_T - _MARGIN_B
    px = lambda x: _MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w
    py = lambda y: _MARGIN_T + (1.0 - to_unit_y(y)) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_WIDTH // 2}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="16">{title}</text>',
    ]
    frame = (f'M {_MARGIN_L} {_MARGIN_T} H {_WIDTH - _MARGIN_R} V {_HEIGHT - _MARGIN_B} '
             f'H {_MARGIN_L} Z')
    out.append(f'<path d="{frame}" fill="none" stroke="#444" stroke-width="1"/>')

    for tx in ticks_x:
        if not x_lo <= tx <= x_hi:
            continue
        x = px(tx)
        out.append(f'<line x1="{x:.2f}" y1="{_HEIGHT - _MARGIN_B}" x2="{x:.2f}" '
                   f'y2="{_HEIGHT - _MARGIN_B + 5}" stroke="#444"/>')
        out.append(f'<text x="{x:.2f}" y="{_HEIGHT - _MARGIN_B + 20}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="11">{tx:g}</text>')
    for ty in ticks_y:
        y = py(ty)
        out.append(f'<line x1="{_MARGIN_L - 5}" y1="{y:.2f}" x2="{_WIDTH - _MARGIN_R}" '
                   f'y2="{y:.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{_MARGIN_L - 8}" y="{y + 4:.2f}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="11">{ty:g}</text>')
    out.append(f'<text x="{_MARGIN_L + plot_w / 2:.0f}" y="{_HEIGHT - 10}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="12">{x_label}</text>')
    if y_label:
        out.append(f'<text x="16" y="{_MARGIN_T + plot_h / 2:.0f}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="12" '
                   f'transform="rotate(-90 16 {_MARGIN_T + plot_h / 2:.0f})">{y_label}</text>')

    for i, (name, (xs, ys)) in enumerate(cleaned.items()):
        color = _PALETTE[i % len(_PALETTE)]
        points = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
        out.append(f'<polyline points="{points}" fill="none" stroke="{color}" '
                   f'stroke-width="1.5"/>')
        ly = _MARGIN_T + 16 + 16 * i
        lx = _WIDTH - _MARGIN_R - 150
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 28}" y="{ly}" font-family="sans-serif" '
                   f'font-size="12">{name}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
