"""Deterministic SVG rendering of evaluation trajectories and learning curves.

Plot coordinates are 10 m pixels, matching the published figures. Output depends
only on the inputs: numbers are written at fixed precision and nothing
time- or id-dependent is emitted, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

from .evaluation import EvalReport
from .scenario import WORLD_UNIT_M, Circle, Rectangle

CANVAS = 640.0
MARGIN = 50.0
STATIC_ARROW_EVERY = 15
ARROW_LEN_PX = 12.0  # figure pixels


def _f(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


class _Canvas:
    def __init__(self, xmin, ymin, xmax, ymax):
        self.xmin, self.ymin, self.xmax, self.ymax = xmin, ymin, xmax, ymax
        span = max(xmax - xmin, ymax - ymin)
        self.k = CANVAS / span
        self.width = (xmax - xmin) * self.k + 2 * MARGIN
        self.height = (ymax - ymin) * self.k + 2 * MARGIN
        self.parts: list[str] = []

    def sx(self, x):
        return MARGIN + (x - self.xmin) * self.k

    def sy(self, y):
        return MARGIN + (self.ymax - y) * self.k

    def add(self, s: str):
        self.parts.append(s)

    def axes(self, tick: float, xlabel: str, ylabel: str):
        x0, y0 = self.sx(self.xmin), self.sy(self.ymin)
        x1, y1 = self.sx(self.xmax), self.sy(self.ymax)
        self.add(f'<rect x="{_f(x0)}" y="{_f(y1)}" width="{_f(x1 - x0)}" height="{_f(y0 - y1)}" '
                 'fill="none" stroke="black" stroke-width="1" class="axis"/>')
        for v in _ticks(self.xmin, self.xmax, tick):
            x = self.sx(v)
            self.add(f'<line x1="{_f(x)}" y1="{_f(y0)}" x2="{_f(x)}" y2="{_f(y0 + 4)}" stroke="black"/>')
            self.add(f'<text x="{_f(x)}" y="{_f(y0 + 16)}" font-size="10" text-anchor="middle">{_num(v)}</text>')
        for v in _ticks(self.ymin, self.ymax, tick):
            y = self.sy(v)
            self.add(f'<line x1="{_f(x0 - 4)}" y1="{_f(y)}" x2="{_f(x0)}" y2="{_f(y)}" stroke="black"/>')
            self.add(f'<text x="{_f(x0 - 6)}" y="{_f(y + 3)}" font-size="10" text-anchor="end">{_num(v)}</text>')
        self.add(f'<text x="{_f((x0 + x1) / 2)}" y="{_f(self.height - 8)}" font-size="12" '
                 f'text-anchor="middle">{escape(xlabel)}</text>')
        self.add(f'<text x="12" y="{_f((y0 + y1) / 2)}" font-size="12" text-anchor="middle" '
                 f'transform="rotate(-90 12 {_f((y0 + y1) / 2)})">{escape(ylabel)}</text>')

    def marker_plus(self, x, y, color="black", size=6.0, cls="goal"):
        cx, cy = self.sx(x), self.sy(y)
        self.add(f'<path d="M{_f(cx - size)} {_f(cy)}H{_f(cx + size)}M{_f(cx)} {_f(cy - size)}V{_f(cy + size)}" '
                 f'stroke="{color}" stroke-width="2" class="{cls}"/>')

    def marker_star(self, x, y, color="black", size=7.0):
        cx, cy = self.sx(x), self.sy(y)
        pts = []
        for i in range(10):
            r = size if i % 2 == 0 else size * 0.45
            a = -math.pi / 2 + i * math.pi / 5
            pts.append(f"{_f(cx + r * math.cos(a))},{_f(cy + r * math.sin(a))}")
        self.add(f'<polygon points="{" ".join(pts)}" fill="{color}" class="goal"/>')

    def render(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(self.width)}" height="{_f(self.height)}" '
                f'viewBox="0 0 {_f(self.width)} {_f(self.height)}">')
        return "\n".join(['<?xml version="1.0" encoding="UTF-8"?>', head,
                          '<rect width="100%" height="100%" fill="white"/>', *self.parts, "</svg>", ""])


def _ticks(lo, hi, step):
    v = math.ceil(lo / step) * step
    out = []
    while v <= hi + 1e-9:
        out.append(v)
        v += step
    return out


def _num(v):
    return str(int(round(v))) if abs(v - round(v)) < 1e-9 else _f(v)


def _nice_step(span):
    raw = span / 8.0
    mag = 10 ** math.floor(math.log10(raw)) if raw > 0 else 1.0
    for m in (1, 2, 5, 10):
        if raw <= m * mag:
            return m * mag
    return 10 * mag


def _px(v_m):
    return v_m / WORLD_UNIT_M


def plot_report(report: EvalReport, scenario=None, style: str = "auto", every: int | None = None) -> str:
    """Trajectory figure. ``style`` is ``"arrows"`` (heading arrows), ``"circles"`` (speed circles) or ``"auto"``."""
    kind = scenario.kind if scenario is not None else report.kind
    if style == "auto":
        style = "arrows" if kind == "static" else "circles"
    if every is None:
        if style == "arrows":
            every = STATIC_ARROW_EVERY
        else:
            speed_ctl = scenario is not None and getattr(scenario, "control_mode", "") == "heading_and_speed"
            every = 3 if speed_ctl else 5

    if scenario is not None and kind == "static":
        xmin, ymin, xmax, ymax = (_px(v) for v in scenario.airspace)
    elif scenario is not None:
        xmin, ymin, xmax, ymax = scenario.bounds
    else:
        xs = [_px(p[1]) for e in report.episodes for p in e.trajectory] or [0.0, 1.0]
        ys = [_px(p[2]) for e in report.episodes for p in e.trajectory] or [0.0, 1.0]
        xmin, xmax, ymin, ymax = min(xs), max(xs), min(ys), max(ys)
        if xmax - xmin < 1e-9:
            xmax = xmin + 1.0
        if ymax - ymin < 1e-9:
            ymax = ymin + 1.0
    cv = _Canvas(xmin, ymin, xmax, ymax)
    cv.axes(_nice_step(max(xmax - xmin, ymax - ymin)), "x (×10 m)", "y (×10 m)")

    if scenario is not None:
        _draw_scenario(cv, scenario)

    for e in report.episodes:
        pts = [(_px(p[1]), _px(p[2])) for p in e.trajectory]
        if len(pts) > 1:
            d = " ".join(f"{_f(cv.sx(x))},{_f(cv.sy(y))}" for x, y in pts)
            color = "#1f77b4" if e.success else "#d62728"
            cv.add(f'<polyline points="{d}" fill="none" stroke="{color}" stroke-width="0.8" '
                   f'class="trajectory" data-episode="{e.episode_id}"/>')
        for t, x_m, y_m, hdg, spd in e.trajectory:
            if t % every:
                continue
            x, y = _px(x_m), _px(y_m)
            if style == "arrows":
                _arrow(cv, x, y, math.radians(hdg), t)
            else:
                r = max(_px(spd), 0.05) * cv.k
                cv.add(f'<circle cx="{_f(cv.sx(x))}" cy="{_f(cv.sy(y))}" r="{_f(r)}" fill="none" '
                       f'stroke="#1f77b4" class="speed" data-t="{t}"/>')
                if t % (2 * every) == 0:
                    cv.add(f'<text x="{_f(cv.sx(x) + r + 2)}" y="{_f(cv.sy(y))}" font-size="8" '
                           f'fill="#1f77b4">{t}</text>')
    return cv.render()


def _arrow(cv: _Canvas, x, y, heading, t):
    L = ARROW_LEN_PX * (CANVAS / 400.0) / cv.k
    x2, y2 = x + L * math.cos(heading), y + L * math.sin(heading)
    sx1, sy1, sx2, sy2 = cv.sx(x), cv.sy(y), cv.sx(x2), cv.sy(y2)
    ang = math.atan2(sy2 - sy1, sx2 - sx1)
    h = 4.0
    a1 = (sx2 - h * math.cos(ang - 0.4), sy2 - h * math.sin(ang - 0.4))
    a2 = (sx2 - h * math.cos(ang + 0.4), sy2 - h * math.sin(ang + 0.4))
    cv.add(f'<path d="M{_f(sx1)} {_f(sy1)}L{_f(sx2)} {_f(sy2)}M{_f(a1[0])} {_f(a1[1])}L{_f(sx2)} {_f(sy2)}'
           f'L{_f(a2[0])} {_f(a2[1])}" stroke="black" stroke-width="0.8" fill="none" class="arrow" data-t="{t}"/>')


def _draw_scenario(cv: _Canvas, sc):
    if sc.kind == "static":
        for ob in sc.obstacles:
            if isinstance(ob, Circle):
                cx, cy, r = cv.sx(_px(ob.center.x)), cv.sy(_px(ob.center.y)), _px(ob.radius) * cv.k
                cv.add(f'<circle cx="{_f(cx)}" cy="{_f(cy)}" r="{_f(r)}" fill="#4a7bd0" class="obstacle"/>')
                if sc.separation > 0:
                    rs = _px(ob.radius + sc.separation) * cv.k
                    cv.add(f'<circle cx="{_f(cx)}" cy="{_f(cy)}" r="{_f(rs)}" fill="none" stroke="red" '
                           'class="separation"/>')
            elif isinstance(ob, Rectangle):
                x0, y1 = cv.sx(_px(ob.min_corner.x)), cv.sy(_px(ob.max_corner.y))
                w = _px(ob.max_corner.x - ob.min_corner.x) * cv.k
                h = _px(ob.max_corner.y - ob.min_corner.y) * cv.k
                cv.add(f'<rect x="{_f(x0)}" y="{_f(y1)}" width="{_f(w)}" height="{_f(h)}" fill="#4a7bd0" '
                       'class="obstacle"/>')
        cv.marker_plus(_px(sc.goal.x), _px(sc.goal.y))
        return
    # Intruder tracks are only known in advance when origin and heading are fixed.
    for it in sc.intruders:
        fixed = not any(isinstance(v, (tuple, list)) for v in (*it.origin, it.heading))
        if not fixed:
            continue
        x0, y0 = it.origin
        vx, vy = it.speed * math.cos(it.heading), it.speed * math.sin(it.heading)
        pts = [(x0 + t * vx, y0 + t * vy) for t in range(0, sc.max_steps + 1, 3)]
        d = " ".join(f"{_f(cv.sx(x))},{_f(cv.sy(y))}" for x, y in pts)
        cv.add(f'<polyline points="{d}" fill="none" stroke="black" stroke-dasharray="3,2" class="intruder"/>')
        cv.marker_plus(x0, y0, size=4.0, cls="intruder-origin")
    ox, oy = (v if not isinstance(v, (tuple, list)) else (v[0] + v[1]) / 2 for v in sc.agent_origin)
    cv.marker_plus(ox, oy, color="#1f77b4", cls="origin")
    cv.marker_star(sc.goal.x, sc.goal.y, color="#1f77b4")


def plot_learning_curve(records: list) -> str:
    """Episode reward mean against environment steps."""
    pts = [(float(r["env_steps"]), float(r["episode_reward_mean"])) for r in records
           if math.isfinite(float(r["episode_reward_mean"]))]
    if pts:
        xmin, xmax = 0.0, max(p[0] for p in pts)
        ymin, ymax = min(p[1] for p in pts), max(p[1] for p in pts)
    else:
        xmin, xmax, ymin, ymax = 0.0, 1.0, 0.0, 1.0
    if ymax - ymin < 1e-9:
        ymin, ymax = ymin - 1.0, ymax + 1.0
    if xmax - xmin < 1e-9:
        xmax = xmin + 1.0
    # Stretch y so both axes fill the square canvas.
    sy = (xmax - xmin) / (ymax - ymin)
    cv = _Canvas(xmin, ymin * sy, xmax, ymax * sy)
    cv.add(f'<text x="{_f(cv.width / 2)}" y="20" font-size="13" text-anchor="middle">Episode reward mean</text>')
    x0, y0 = cv.sx(xmin), cv.sy(ymin * sy)
    x1, y1 = cv.sx(xmax), cv.sy(ymax * sy)
    cv.add(f'<rect x="{_f(x0)}" y="{_f(y1)}" width="{_f(x1 - x0)}" height="{_f(y0 - y1)}" fill="none" stroke="black"/>')
    for v in _ticks(ymin, ymax, _nice_step(ymax - ymin)):
        y = cv.sy(v * sy)
        cv.add(f'<text x="{_f(x0 - 6)}" y="{_f(y + 3)}" font-size="10" text-anchor="end">{_num(v)}</text>')
    for v in _ticks(xmin, xmax, _nice_step(xmax - xmin)):
        x = cv.sx(v)
        cv.add(f'<text x="{_f(x)}" y="{_f(y0 + 16)}" font-size="10" text-anchor="middle">{_num(v)}</text>')
    if pts:
        d = " ".join(f"{_f(cv.sx(x))},{_f(cv.sy(y * sy))}" for x, y in pts)
        cv.add(f'<polyline points="{d}" fill="none" stroke="#1f77b4" stroke-width="1.2" class="curve"/>')
    return cv.render()


def emit_plot(obj, scenario=None, style: str = "auto", every: int | None = None) -> str:
    """SVG for an :class:`EvalReport` or a list of learning-curve records."""
    if isinstance(obj, EvalReport):
        return plot_report(obj, scenario, style, every)
    return plot_learning_curve(list(obj))
