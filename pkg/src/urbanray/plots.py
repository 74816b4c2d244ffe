"""Deterministic SVG charts and the per-configuration summary table."""

from __future__ import annotations

import csv
import io
import math
from typing import Sequence
from xml.sax.saxutils import escape

from .evaluation import SCENARIOS, FidelityReport

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
           "#bcbd22", "#17becf")
SCENARIO_LABELS = {"RR": "R->R", "RS": "R->S", "SS": "S->S", "SR": "S->R"}


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".") if v != int(v) else str(int(v))


def _label(v) -> str:
    if isinstance(v, float):
        return _fmt(v)
    return str(getattr(v, "value", v))


def table_csv(rows: Sequence[tuple[str, FidelityReport]], stations: Sequence[str] | None = None,
              extra: Sequence[tuple[str, dict]] = (), comments: Sequence[str] = ()) -> str:
    """One row per labelled report: per-station Spearman then the four kNN errors.

    ``extra`` rows (label, {station: text}) carry per-station settings such
    as optimized altitude or azimuth.  Undefined correlations print as
    ``UNDEFINED``.
    """
    if stations is None:
        stations = list(rows[0][1].per_station_spearman) if rows else []
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["", *stations, *(SCENARIO_LABELS[s] for s in SCENARIOS)])
    for label, rep in rows:
        rho = [rep.per_station_spearman.get(s) for s in stations]
        w.writerow([label, *("UNDEFINED" if r is None else f"{r:.2f}" for r in rho),
                    *(f"{rep.knn_errors[s]:.2f}" for s in SCENARIOS)])
    for label, vals in extra:
        w.writerow([label, *(vals.get(s, "") for s in stations), *([""] * len(SCENARIOS))])
    return buf.getvalue()


class _Svg:
    def __init__(self, width: int, height: int, title: str, comments: Sequence[str] = ()):
        self.parts = ['<?xml version="1.0" encoding="UTF-8"?>']
        self.parts += [f"<!-- {escape(c).replace('--', '- -')} -->" for c in comments]
        self.parts.append(f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
                          f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">')
        self.parts.append(f'<title>{escape(title)}</title>')
        self.parts.append(f'<text x="{width / 2:.1f}" y="16" text-anchor="middle" font-size="13">'
                          f'{escape(title)}</text>')

    def add(self, s: str) -> None:
        self.parts.append(s)

    def text(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _axes(svg: _Svg, x0, y0, x1, y1, lo, hi, ylabel, ticks=5):
    svg.add(f'<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="black"/>')
    svg.add(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>')
    for i in range(ticks + 1):
        v = lo + (hi - lo) * i / ticks
        y = y1 - (y1 - y0) * i / ticks
        svg.add(f'<line x1="{x0 - 4}" y1="{y:.1f}" x2="{x0}" y2="{y:.1f}" stroke="black"/>')
        svg.add(f'<text x="{x0 - 6}" y="{y + 4:.1f}" text-anchor="end">{v:.2f}</text>')
    svg.add(f'<text x="14" y="{(y0 + y1) / 2:.1f}" transform="rotate(-90 14 {(y0 + y1) / 2:.1f})" '
            f'text-anchor="middle">{escape(ylabel)}</text>')


def spearman_bars(values: Sequence, reports: Sequence[FidelityReport], title: str, xlabel: str = "",
                  comments: Sequence[str] = ()) -> str:
    """Grouped bars: one group per swept value, one bar per station."""
    stations = list(reports[0].per_station_spearman) if reports else []
    n_g, n_b = len(values), max(len(stations), 1)
    group_w = max(24 * n_b + 16, 60)
    width, height = 80 + group_w * n_g + 140, 320
    x0, y0, y1 = 60, 30, height - 50
    svg = _Svg(width, height, title, comments)
    lo = min([0.0] + [r for rep in reports for r in rep.per_station_spearman.values() if r is not None])
    lo = -1.0 if lo < 0 else 0.0
    _axes(svg, x0, y0, x0 + group_w * n_g, y1, lo, 1.0, "Spearman correlation")

    def ypos(v):
        return y1 - (y1 - y0) * (v - lo) / (1.0 - lo)

    for g, (val, rep) in enumerate(zip(values, reports)):
        gx = x0 + g * group_w + 8
        svg.add(f'<g class="group" data-value="{escape(_label(val))}">')
        for b, s in enumerate(stations):
            r = rep.per_station_spearman[s]
            if r is None:
                continue
            top, base = ypos(max(r, 0.0)), ypos(min(r, 0.0))
            svg.add(f'<rect x="{gx + b * 24}" y="{top:.1f}" width="20" height="{base - top:.1f}" '
                    f'fill="{PALETTE[b % len(PALETTE)]}"><title>{escape(s)}: {r:.4f}</title></rect>')
        svg.add(f'<text x="{gx + group_w / 2 - 8:.1f}" y="{y1 + 16}" text-anchor="middle">'
                f'{escape(_label(val))}</text>')
        svg.add("</g>")
    if xlabel:
        svg.add(f'<text x="{x0 + group_w * n_g / 2:.1f}" y="{height - 12}" text-anchor="middle">'
                f'{escape(xlabel)}</text>')
    lx = x0 + group_w * n_g + 20
    for b, s in enumerate(stations):
        svg.add(f'<rect x="{lx}" y="{y0 + b * 18}" width="12" height="12" fill="{PALETTE[b % len(PALETTE)]}"/>')
        svg.add(f'<text x="{lx + 18}" y="{y0 + b * 18 + 10}">{escape(s)}</text>')
    return svg.text()


def knn_curves(values: Sequence, reports: Sequence[FidelityReport], title: str, xlabel: str = "",
               comments: Sequence[str] = ()) -> str:
    """One polyline per kNN scenario across the swept values."""
    n = len(values)
    step = 70
    width, height = 80 + step * max(n - 1, 1) + 160, 320
    x0, y0, y1 = 60, 30, height - 50
    svg = _Svg(width, height, title, comments)
    hi = max([1.0] + [rep.knn_errors[s] for rep in reports for s in SCENARIOS])
    hi = 10 ** math.ceil(math.log10(hi)) if hi > 0 else 1.0
    hi = hi / 2 if all(rep.knn_errors[s] <= hi / 2 for rep in reports for s in SCENARIOS) else hi
    x1 = x0 + step * max(n - 1, 1) + 20
    _axes(svg, x0, y0, x1, y1, 0.0, hi, "mean kNN error (m)")

    def xpos(i):
        return x0 + 10 + step * i

    for i, v in enumerate(values):
        svg.add(f'<text x="{xpos(i)}" y="{y1 + 16}" text-anchor="middle">{escape(_label(v))}</text>')
    for c, s in enumerate(SCENARIOS):
        pts = " ".join(f"{xpos(i)},{y1 - (y1 - y0) * rep.knn_errors[s] / hi:.1f}" for i, rep in enumerate(reports))
        color = PALETTE[c]
        svg.add(f'<polyline class="scenario" data-scenario="{s}" points="{pts}" fill="none" '
                f'stroke="{color}" stroke-width="2"/>')
        svg.add(f'<rect x="{x1 + 20}" y="{y0 + c * 18}" width="12" height="12" fill="{color}"/>')
        svg.add(f'<text x="{x1 + 38}" y="{y0 + c * 18 + 10}">{escape(SCENARIO_LABELS[s])}</text>')
    if xlabel:
        svg.add(f'<text x="{(x0 + x1) / 2:.1f}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    return svg.text()
