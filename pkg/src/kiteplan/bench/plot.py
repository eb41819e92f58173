"""Deterministic SVG rendering of a scenario and (optionally) its solution.

2D scenes are drawn top-down. 3D scenes use an isometric projection where
each box obstacle becomes the silhouette of its eight projected corners.
Output depends only on the inputs: coordinates are printed with fixed
precision and colours come from a fixed palette.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Optional

import numpy as np

from ..mrmp import Solution
from .scenario import Scenario

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2",
           "#17becf", "#bcbd22", "#7f7f7f")
CANVAS = 640.0
PAD = 20.0

_C30 = math.cos(math.pi / 6)
_S30 = math.sin(math.pi / 6)


def colour(i: int) -> str:
    return PALETTE[i % len(PALETTE)]


def _iso(p) -> tuple:
    x, y, z = p
    return ((x - y) * _C30, (x + y) * _S30 + z)


def _hull(points):
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def _box_corners(lo, hi):
    return [(a, b, c) for a in (lo[0], hi[0]) for b in (lo[1], hi[1]) for c in (lo[2], hi[2])]


class _Frame:
    """Maps world (projected) coordinates into the SVG canvas, y pointing up."""

    def __init__(self, pts):
        pts = np.asarray(pts, dtype=float)
        self.lo = pts.min(axis=0)
        span = pts.max(axis=0) - self.lo
        self.scale = (CANVAS - 2 * PAD) / max(span.max(), 1e-9)
        self.h = span[1] * self.scale + 2 * PAD
        self.w = span[0] * self.scale + 2 * PAD

    def __call__(self, p):
        return (PAD + (p[0] - self.lo[0]) * self.scale, self.h - PAD - (p[1] - self.lo[1]) * self.scale)


def _pts(coords) -> str:
    return " ".join(f"{x:.2f},{y:.2f}" for x, y in coords)


def render_svg(scenario: Scenario, solution: Optional[Solution] = None) -> str:
    three = len(scenario.lo) == 3
    proj = _iso if three else (lambda p: (p[0], p[1]))
    if three:
        frame_pts = [proj(c) for c in _box_corners(scenario.lo, scenario.hi)]
    else:
        frame_pts = [(scenario.lo[0], scenario.lo[1]), (scenario.hi[0], scenario.hi[1])]
    F = _Frame(frame_pts)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{F.w:.0f}" height="{F.h:.0f}" '
           f'viewBox="0 0 {F.w:.2f} {F.h:.2f}">',
           f'<rect width="{F.w:.2f}" height="{F.h:.2f}" fill="white"/>']
    if three:
        corners = _box_corners(scenario.lo, scenario.hi)
        for i, a in enumerate(corners):
            for b in corners[i + 1:]:
                if sum(u != v for u, v in zip(a, b)) == 1:
                    (x1, y1), (x2, y2) = F(proj(a)), F(proj(b))
                    out.append(f'<line class="bounds" x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" '
                               f'y2="{y2:.2f}" stroke="black" stroke-width="1"/>')
    else:
        out.append(f'<polygon class="bounds" points="{_pts(F(c) for c in _box_corners2(scenario))}" '
                   f'fill="none" stroke="black" stroke-width="1.5"/>')
    for lo, hi in scenario.obstacles:
        if three:
            poly = _hull([proj(c) for c in _box_corners(lo, hi)])
        else:
            poly = [(lo[0], lo[1]), (hi[0], lo[1]), (hi[0], hi[1]), (lo[0], hi[1])]
        out.append(f'<polygon class="obstacle" points="{_pts(F(p) for p in poly)}" '
                   f'fill="#9a9a9a" fill-opacity="0.6" stroke="#555555" stroke-width="0.8"/>')
    for i, a in enumerate(scenario.agents):
        c = colour(i)
        gx, gy = F(proj(a.goal))
        out.append(f'<circle class="goal" cx="{gx:.2f}" cy="{gy:.2f}" r="{a.goal_radius * F.scale:.2f}" '
                   f'fill="{c}" fill-opacity="0.25" stroke="{c}" stroke-width="1"/>')
        sx, sy = F(proj(a.start[: len(scenario.lo)]))
        out.append(f'<circle class="start" cx="{sx:.2f}" cy="{sy:.2f}" r="4.00" fill="{c}" '
                   f'stroke="black" stroke-width="0.6"/>')
    if solution is not None:
        d = len(scenario.lo)
        for i, tr in enumerate(solution.trajectories):
            pts = [F(proj(s[:d])) for s in tr.states()]
            out.append(f'<polyline class="trajectory" points="{_pts(pts)}" fill="none" '
                       f'stroke="{colour(i)}" stroke-width="1.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _box_corners2(sc: Scenario):
    lo, hi = sc.lo, sc.hi
    return [(lo[0], lo[1]), (hi[0], lo[1]), (hi[0], hi[1]), (lo[0], hi[1])]


def emit_plot(scenario: Scenario, solution: Optional[Solution], path) -> None:
    """Write the SVG to ``path``; raises ``OSError`` when the path is not writable."""
    Path(path).write_text(render_svg(scenario, solution))
