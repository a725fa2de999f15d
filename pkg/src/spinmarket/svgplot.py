"""Deterministic SVG plots with a sibling CSV of the plotted data.

Output depends only on the data: coordinates are printed with a fixed
number of decimals, element order follows input order, and no dates or
random ids are embedded. Identical input gives byte-identical files.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Literal, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .csvio import write_csv
from .errors import InvalidParameterError

PlotKind = Literal["series", "scatter", "stack"]

WIDTH = 640
PANEL_HEIGHT = 220
MARGIN_LEFT = 70
MARGIN_RIGHT = 20
MARGIN_TOP = 30
MARGIN_BOTTOM = 40
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


@dataclass
class Trace:
    label: str
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise InvalidParameterError(f"trace {self.label!r}: x and y must be 1-D of equal length")


@dataclass
class PlotData:
    traces: list[Trace]
    title: str = ""
    xlabel: str = "x"
    ylabel: str = "y"
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_points(cls, z, title: str = "", label: str = "zeros") -> "PlotData":
        """Scatter data from complex points (real part on x, imaginary on y)."""
        z = np.asarray(z, dtype=complex)
        return cls([Trace(label, z.real, z.imag)], title, "Re", "Im")


def _num(v: float) -> str:
    s = f"{v:.3f}"
    return "0.000" if s == "-0.000" else s


def _range(values: np.ndarray) -> tuple[float, float]:
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return 0.0, 1.0
    lo, hi = float(finite.min()), float(finite.max())
    if hi - lo <= 1e-300 * max(1.0, abs(hi)):
        pad = max(abs(hi), 1.0) * 0.5
        return lo - pad, hi + pad
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


class _Panel:
    def __init__(self, top: float, xr, yr):
        self.top = top
        self.xr = xr
        self.yr = yr
        self.w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
        self.h = PANEL_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def px(self, x):
        return MARGIN_LEFT + (x - self.xr[0]) / (self.xr[1] - self.xr[0]) * self.w

    def py(self, y):
        return self.top + MARGIN_TOP + (self.yr[1] - y) / (self.yr[1] - self.yr[0]) * self.h

    def axes(self, xlabel: str, ylabel: str, title: str) -> list[str]:
        x0, y0 = MARGIN_LEFT, self.top + MARGIN_TOP
        out = [
            f'<rect x="{x0}" y="{_num(y0)}" width="{self.w}" height="{self.h}" '
            'fill="none" stroke="#000" stroke-width="1" class="axes"/>'
        ]
        for frac in (0.0, 0.5, 1.0):
            xv = self.xr[0] + frac * (self.xr[1] - self.xr[0])
            yv = self.yr[0] + frac * (self.yr[1] - self.yr[0])
            out.append(
                f'<text x="{_num(self.px(xv))}" y="{_num(y0 + self.h + 15)}" '
                f'text-anchor="middle" font-size="10">{_tick(xv)}</text>'
            )
            out.append(
                f'<text x="{x0 - 5}" y="{_num(self.py(yv) + 3)}" '
                f'text-anchor="end" font-size="10">{_tick(yv)}</text>'
            )
        out.append(
            f'<text x="{_num(x0 + self.w / 2)}" y="{_num(y0 + self.h + 32)}" '
            f'text-anchor="middle" font-size="12">{escape(xlabel)}</text>'
        )
        out.append(
            f'<text x="14" y="{_num(y0 + self.h / 2)}" text-anchor="middle" font-size="12" '
            f'transform="rotate(-90 14 {_num(y0 + self.h / 2)})">{escape(ylabel)}</text>'
        )
        if title:
            out.append(
                f'<text x="{_num(x0 + self.w / 2)}" y="{_num(self.top + 18)}" '
                f'text-anchor="middle" font-size="13">{escape(title)}</text>'
            )
        return out


def _tick(v: float) -> str:
    return "0" if v == 0 else f"{v:.4g}"


def _polyline(panel: _Panel, tr: Trace, color: str) -> str:
    ok = np.isfinite(tr.x) & np.isfinite(tr.y)
    pts = " ".join(f"{_num(panel.px(x))},{_num(panel.py(y))}" for x, y in zip(tr.x[ok], tr.y[ok]))
    return (
        f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1" '
        f'data-label="{escape(tr.label)}"/>'
    )


def render_svg(data: PlotData, kind: PlotKind) -> str:
    if kind not in ("series", "scatter", "stack"):
        raise InvalidParameterError(f"unknown plot kind {kind!r}")
    if not data.traces or all(len(t.x) == 0 for t in data.traces):
        raise InvalidParameterError("nothing to plot")
    n_panels = len(data.traces) if kind == "stack" else 1
    height = PANEL_HEIGHT * n_panels
    body: list[str] = []
    if kind == "stack":
        xr = _range(np.concatenate([t.x for t in data.traces]))
        for k, tr in enumerate(data.traces):
            panel = _Panel(k * PANEL_HEIGHT, xr, _range(tr.y))
            body += panel.axes(data.xlabel, tr.label, data.title if k == 0 else "")
            body.append(_polyline(panel, tr, PALETTE[k % len(PALETTE)]))
    else:
        xr = _range(np.concatenate([t.x for t in data.traces]))
        yr = _range(np.concatenate([t.y for t in data.traces]))
        panel = _Panel(0, xr, yr)
        body += panel.axes(data.xlabel, data.ylabel, data.title)
        for k, tr in enumerate(data.traces):
            color = PALETTE[k % len(PALETTE)]
            if kind == "series":
                body.append(_polyline(panel, tr, color))
                continue
            for x, y in zip(tr.x, tr.y):
                if math.isfinite(x) and math.isfinite(y):
                    body.append(
                        f'<circle class="marker" cx="{_num(panel.px(x))}" cy="{_num(panel.py(y))}" '
                        f'r="1.5" fill="{color}"/>'
                    )
        if len(data.traces) > 1:
            for k, tr in enumerate(data.traces):
                y = MARGIN_TOP + 12 * k + 8
                body.append(
                    f'<text x="{WIDTH - MARGIN_RIGHT - 5}" y="{y}" text-anchor="end" font-size="10" '
                    f'fill="{PALETTE[k % len(PALETTE)]}">{escape(tr.label)}</text>'
                )
    head = (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" '
        f'viewBox="0 0 {WIDTH} {height}">\n'
        f'<rect width="{WIDTH}" height="{height}" fill="#fff"/>\n'
    )
    return head + "\n".join(body) + "\n</svg>\n"


def sibling_csv_path(path) -> str:
    root, _ = os.path.splitext(os.fspath(path))
    return root + ".csv"


def emit_plot(data: PlotData | Sequence[Trace], kind: PlotKind, path) -> tuple[str, str]:
    """Write ``path`` (SVG) and its sibling ``.csv``; returns both paths.

    The CSV has columns ``series,x,y`` with one row per plotted point.
    """
    if not isinstance(data, PlotData):
        data = PlotData(list(data))
    svg = render_svg(data, kind)
    path = os.fspath(path)
    with open(path, "w", newline="") as fh:
        fh.write(svg)
    csv_path = sibling_csv_path(path)
    rows = [(t.label, x, y) for t in data.traces for x, y in zip(t.x.tolist(), t.y.tolist())]
    write_csv(csv_path, ["series", "x", "y"], rows)
    return path, csv_path
