"""Deterministic SVG rendering of control-set descriptions.

Coordinates are mathematical (y up); the flip happens when points are
emitted.  Every number is printed with a fixed format so identical inputs
give identical bytes.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .classify import Cone, Line, VerticalLines, VerticalSegments, WholeGroup

WIDTH, HEIGHT, PAD = 640, 480, 40
SEGMENT_XS = (0.5, 1.0, 1.5, 2.0, 3.0)

_FILL = "#9ecae1"
_EDGE = "#08519c"


class _Canvas:
    def __init__(self, viewport: Sequence[float]):
        self.x0, self.x1, self.y0, self.y1 = (float(v) for v in viewport)
        self.items: list[str] = []

    def px(self, x: float, y: float) -> tuple[float, float]:
        sx = PAD + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2 * PAD)
        sy = HEIGHT - PAD - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2 * PAD)
        return sx, sy

    def pts(self, points: Iterable[tuple[float, float]]) -> str:
        return " ".join("%.3f,%.3f" % self.px(x, y) for x, y in points)

    def rect(self) -> list[tuple[float, float]]:
        return [(self.x0, self.y0), (self.x1, self.y0), (self.x1, self.y1), (self.x0, self.y1)]

    def add(self, s: str) -> None:
        self.items.append(s)


def clip_half_plane(poly, intercept: float, slope: float, keep_above: bool):
    """Clip a polygon to ``y >= intercept + slope x`` (or ``<=``); Sutherland-Hodgman."""
    sign = 1.0 if keep_above else -1.0

    def f(p):
        return sign * (p[1] - intercept - slope * p[0])

    out = []
    n = len(poly)
    for i in range(n):
        cur, nxt = poly[i], poly[(i + 1) % n]
        fc, fn = f(cur), f(nxt)
        if fc >= 0:
            out.append(cur)
        if (fc >= 0) != (fn >= 0):
            s = fc / (fc - fn)
            out.append((cur[0] + s * (nxt[0] - cur[0]), cur[1] + s * (nxt[1] - cur[1])))
    return out


def _clip_line(cv: _Canvas, intercept: float, slope: float):
    """Part of the line y = intercept + slope x inside the viewport, or None."""
    t0, t1 = cv.x0, cv.x1
    if slope != 0.0:
        a = (cv.y0 - intercept) / slope
        b = (cv.y1 - intercept) / slope
        t0, t1 = max(t0, min(a, b)), min(t1, max(a, b))
    elif not cv.y0 <= intercept <= cv.y1:
        return None
    if t0 > t1:
        return None
    return [(t0, intercept + slope * t0), (t1, intercept + slope * t1)]


def _line(cv: _Canvas, intercept: float, slope: float, extra: str = "") -> None:
    seg = _clip_line(cv, intercept, slope)
    if seg is not None:
        cv.add(f'<polyline points="{cv.pts(seg)}" fill="none" stroke="{_EDGE}" stroke-width="2"{extra}/>')


def _polygon(cv: _Canvas, poly) -> None:
    if len(poly) >= 3:
        cv.add(f'<polygon points="{cv.pts(poly)}" fill="{_FILL}" fill-opacity="0.6" stroke="none"/>')


def _marker(cv: _Canvas, x: float, y: float, label: str) -> None:
    sx, sy = cv.px(x, y)
    cv.add(f'<circle cx="{sx:.3f}" cy="{sy:.3f}" r="4" fill="#de2d26"/>')
    cv.add(f'<text x="{sx + 6:.3f}" y="{sy - 6:.3f}" font-size="12">{label}</text>')


def _draw_description(cv: _Canvas, desc) -> None:
    if isinstance(desc, WholeGroup):
        _polygon(cv, cv.rect())
    elif isinstance(desc, Cone):
        poly = cv.rect()
        if desc.lower is not None:
            poly = clip_half_plane(poly, desc.apex_y, desc.lower.slope, True)
            _line(cv, desc.apex_y, desc.lower.slope)
        if desc.upper is not None:
            poly = clip_half_plane(poly, desc.apex_y, desc.upper.slope, False)
            _line(cv, desc.apex_y, desc.upper.slope)
        _polygon(cv, poly)
        # the apex sits at x = 0, outside G; mark it on the left edge of the viewport
        ay = min(max(desc.apex_y, cv.y0), cv.y1)
        _marker(cv, cv.x0, ay, "apex (0, %.4g)" % desc.apex_y)
    elif isinstance(desc, VerticalLines):
        lo, hi = max(desc.lo, cv.x0), min(desc.hi, cv.x1)
        if lo < hi:
            _polygon(cv, [(lo, cv.y0), (hi, cv.y0), (hi, cv.y1), (lo, cv.y1)])
            for x in np.linspace(lo, hi, 7)[1:-1]:
                cv.add(f'<polyline points="{cv.pts([(x, cv.y0), (x, cv.y1)])}" fill="none" '
                       f'stroke="{_EDGE}" stroke-width="1"/>')
    elif isinstance(desc, VerticalSegments):
        _line(cv, -desc.base_slope, desc.base_slope, ' stroke-dasharray="6,4"')
        for x in SEGMENT_XS:
            if cv.x0 <= x <= cv.x1:
                lo, hi = desc.endpoints(x)
                cv.add(f'<polyline points="{cv.pts([(x, lo), (x, hi)])}" fill="none" '
                       f'stroke="{_EDGE}" stroke-width="3"/>')
    elif isinstance(desc, Line):
        _line(cv, -desc.slope, desc.slope)
    else:
        raise TypeError(f"cannot draw {desc!r}")


def render_svg(
    desc,
    viewport: Sequence[float],
    trajectories: Sequence[tuple[np.ndarray, np.ndarray]] = (),
    title: str = "",
) -> str:
    cv = _Canvas(viewport)
    _draw_description(cv, desc)
    if cv.x0 <= 1.0 <= cv.x1 and cv.y0 <= 0.0 <= cv.y1:
        _marker(cv, 1.0, 0.0, "(1, 0)")
    for xs, ys in trajectories:
        cv.add(f'<polyline points="{cv.pts(zip(xs, ys))}" fill="none" stroke="#31a354" '
               'stroke-width="1" marker-end="url(#arrow)"/>')
    fx0, fy0 = cv.px(cv.x0, cv.y1)
    fx1, fy1 = cv.px(cv.x1, cv.y0)
    head = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        "<defs>",
        '<marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="6" '
        'markerHeight="6" orient="auto"><path d="M0,0 L10,5 L0,10 z" fill="#31a354"/></marker>',
        f'<clipPath id="view"><rect x="{fx0:.3f}" y="{fy0:.3f}" width="{fx1 - fx0:.3f}" '
        f'height="{fy1 - fy0:.3f}"/></clipPath>',
        "</defs>",
        f'<rect x="{fx0:.3f}" y="{fy0:.3f}" width="{fx1 - fx0:.3f}" height="{fy1 - fy0:.3f}" '
        'fill="white" stroke="black"/>',
    ]
    if title:
        head.append(f'<text x="{PAD}" y="{PAD - 12}" font-size="14">{title}</text>')
    labels = [
        f'<text x="{fx0:.3f}" y="{fy1 + 16:.3f}" font-size="11">x = {cv.x0:g}</text>',
        f'<text x="{fx1 - 50:.3f}" y="{fy1 + 16:.3f}" font-size="11">x = {cv.x1:g}</text>',
        f'<text x="4" y="{fy0 + 10:.3f}" font-size="11">y = {cv.y1:g}</text>',
        f'<text x="4" y="{fy1:.3f}" font-size="11">y = {cv.y0:g}</text>',
    ]
    body = ['<g clip-path="url(#view)">'] + cv.items + ["</g>"]
    return "\n".join(head + body + labels + ["</svg>"]) + "\n"
