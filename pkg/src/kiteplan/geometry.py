"""Workspaces, footprints and collision predicates at dt resolution.

Two routes exist on purpose. The scalar predicates in this module are plain
Python (corner-based separating-axis tests, clamped closest points) and back
the solution validator. Planners use the jitted kernels through
:class:`ValidityContext`. Tests check that the two agree.

Touching is collision-free everywhere: overlap must be strictly positive.
Leaving the workspace bounds counts as a static collision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels as K
from .dynamics import SystemModel, TrajectorySegment

_KIND_CODES = {"circle": K.CIRCLE, "rect": K.RECT, "sphere": K.SPHERE}


@dataclass(frozen=True)
class Footprint:
    kind: str
    a: float
    b: float = 0.0

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise ValueError(f"unknown footprint {self.kind!r}")
        if self.a <= 0 or (self.kind == "rect" and self.b <= 0):
            raise ValueError("footprint dimensions must be positive")

    @classmethod
    def circle(cls, radius):
        return cls("circle", float(radius))

    @classmethod
    def rect(cls, length, width):
        return cls("rect", float(length), float(width))

    @classmethod
    def sphere(cls, radius):
        return cls("sphere", float(radius))

    @classmethod
    def for_model(cls, model: SystemModel) -> "Footprint":
        kind, *dims = model.footprint
        return cls(kind, *map(float, dims))

    @property
    def dim(self) -> int:
        return 3 if self.kind == "sphere" else 2

    @property
    def radius(self) -> float:
        """Radius of the smallest enclosing circle/sphere."""
        if self.kind == "rect":
            return 0.5 * math.hypot(self.a, self.b)
        return self.a

    def inflated(self, margin: float) -> "Footprint":
        if self.kind == "rect":
            return Footprint("rect", self.a + 2 * margin, self.b + 2 * margin)
        return Footprint(self.kind, self.a + margin)

    def encode(self) -> np.ndarray:
        return np.array([_KIND_CODES[self.kind], self.a, self.b], dtype=float)

    def to_dict(self):
        return {"kind": self.kind, "a": self.a, "b": self.b}


@dataclass
class Workspace:
    lo: np.ndarray
    hi: np.ndarray
    obstacles: list = field(default_factory=list)  # [(lo, hi), ...] axis-aligned boxes

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        if self.lo.shape != self.hi.shape or np.any(self.hi <= self.lo):
            raise ValueError("degenerate workspace bounds")
        boxes = []
        for blo, bhi in self.obstacles:
            blo = np.asarray(blo, dtype=float)
            bhi = np.asarray(bhi, dtype=float)
            if blo.shape != self.lo.shape or np.any(bhi <= blo):
                raise ValueError("bad obstacle box")
            if np.any(blo < self.lo) or np.any(bhi > self.hi):
                raise ValueError("obstacle outside workspace bounds")
            boxes.append((blo, bhi))
        self.obstacles = boxes

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def obs_lo(self) -> np.ndarray:
        if not self.obstacles:
            return np.zeros((0, self.dim))
        return np.array([b[0] for b in self.obstacles])

    @property
    def obs_hi(self) -> np.ndarray:
        if not self.obstacles:
            return np.zeros((0, self.dim))
        return np.array([b[1] for b in self.obstacles])


@dataclass(frozen=True)
class GoalRegion:
    center: tuple
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("goal radius must be positive")

    def contains(self, x) -> bool:
        c = np.asarray(self.center, dtype=float)
        return float(np.linalg.norm(np.asarray(x)[: c.size] - c)) <= self.radius


@dataclass
class DynamicObstacle:
    """A committed trajectory sampled every dt from ``start_step``; holds its final state forever."""

    footprint: Footprint
    states: np.ndarray
    start_step: int = 0
    hold: bool = True
    dt: float = 0.1

    def state_at_step(self, k: int):
        idx = k - self.start_step
        if idx < 0:
            return None
        if idx >= len(self.states):
            return self.states[-1] if self.hold else None
        return self.states[idx]

    def state_at(self, t: float):
        return self.state_at_step(int(round(t / self.dt)))


@dataclass
class Constraint:
    """Agent ``agent`` must avoid ``footprint`` moving through ``states`` over steps [k_start, k_end]."""

    agent: int
    k_start: int
    k_end: int
    footprint: Footprint
    states: np.ndarray
    other: int = -1
    dt: float = 0.1

    def __post_init__(self):
        if self.k_end < self.k_start or len(self.states) != self.k_end - self.k_start + 1:
            raise ValueError("constraint slice does not match its interval")

    @property
    def t_start(self) -> float:
        return self.k_start * self.dt

    @property
    def t_end(self) -> float:
        # half-open on the dt grid, so a single-sample conflict still has t_start < t_end
        return (self.k_end + 1) * self.dt

    def as_obstacle(self) -> DynamicObstacle:
        return DynamicObstacle(self.footprint, self.states, self.k_start, hold=False, dt=self.dt)


# ------------------------------------------------------------ scalar route


def _rect_corners(x, fp: Footprint):
    c, s = math.cos(x[2]), math.sin(x[2])
    hl, hw = fp.a / 2, fp.b / 2
    return [(x[0] + c * dl - s * dw, x[1] + s * dl + c * dw)
            for dl, dw in ((hl, hw), (hl, -hw), (-hl, -hw), (-hl, hw))]


def _box_corners(lo, hi):
    return [(lo[0], lo[1]), (hi[0], lo[1]), (hi[0], hi[1]), (lo[0], hi[1])]


def _polygon_axes(poly):
    axes = []
    for i in range(len(poly)):
        (x1, y1), (x2, y2) = poly[i], poly[(i + 1) % len(poly)]
        ex, ey = x2 - x1, y2 - y1
        n = math.hypot(ex, ey)
        axes.append((-ey / n, ex / n))
    return axes


def _convex_overlap(p, q) -> bool:
    for ax in _polygon_axes(p) + _polygon_axes(q):
        pp = [ax[0] * x + ax[1] * y for x, y in p]
        qq = [ax[0] * x + ax[1] * y for x, y in q]
        if max(pp) <= min(qq) or max(qq) <= min(pp):
            return False
    return True


def _point_box_dist2(p, lo, hi) -> float:
    return sum(max(lo[i] - p[i], 0.0, p[i] - hi[i]) ** 2 for i in range(len(lo)))


def _check_dim(fp: Footprint, ws: Workspace):
    if fp.dim != ws.dim:
        raise ValueError(f"{fp.kind} footprint is {fp.dim}D but workspace is {ws.dim}D")


def static_collides(fp: Footprint, x, ws: Workspace) -> bool:
    """Footprint at ``x`` overlaps an obstacle or leaves the workspace bounds."""
    _check_dim(fp, ws)
    if fp.kind == "rect":
        corners = _rect_corners(x, fp)
        for cx, cy in corners:
            if not (ws.lo[0] <= cx <= ws.hi[0] and ws.lo[1] <= cy <= ws.hi[1]):
                return True
        return any(_convex_overlap(corners, _box_corners(lo, hi)) for lo, hi in ws.obstacles)
    r = fp.a
    d = ws.dim
    if any(x[i] - r < ws.lo[i] or x[i] + r > ws.hi[i] for i in range(d)):
        return True
    return any(_point_box_dist2(x[:d], lo, hi) < r * r for lo, hi in ws.obstacles)


def agents_collide(fp_i: Footprint, x_i, fp_j: Footprint, x_j) -> bool:
    if fp_i.dim != fp_j.dim:
        raise ValueError("mixed-dimension footprints")
    if fp_i.kind == "rect" and fp_j.kind == "rect":
        return _convex_overlap(_rect_corners(x_i, fp_i), _rect_corners(x_j, fp_j))
    if fp_i.kind == "rect" or fp_j.kind == "rect":
        (rf, rx), (cf, cx) = ((fp_i, x_i), (fp_j, x_j)) if fp_i.kind == "rect" else ((fp_j, x_j), (fp_i, x_i))
        c, s = math.cos(rx[2]), math.sin(rx[2])
        dx, dy = cx[0] - rx[0], cx[1] - rx[1]
        local = (c * dx + s * dy, -s * dx + c * dy)
        lo = (-rf.a / 2, -rf.b / 2)
        hi = (rf.a / 2, rf.b / 2)
        return _point_box_dist2(local, lo, hi) < cf.a ** 2
    d = fp_i.dim
    dist2 = sum((x_i[k] - x_j[k]) ** 2 for k in range(d))
    return dist2 < (fp_i.a + fp_j.a) ** 2


def segment_valid(fp: Footprint, seg: TrajectorySegment, ws: Workspace,
                  dyn_obstacles: Sequence[DynamicObstacle] = (),
                  constraints: Sequence[Constraint] = ()) -> bool:
    """Scalar check of every sample of ``seg`` at absolute step ``seg.start_step + k``."""
    movers = list(dyn_obstacles) + [c.as_obstacle() for c in constraints]
    for k, x in enumerate(seg.states):
        if static_collides(fp, x, ws):
            return False
        step = seg.start_step + k
        for ob in movers:
            y = ob.state_at_step(step)
            if y is not None and agents_collide(fp, x, ob.footprint, y):
                return False
    return True


# ----------------------------------------------------------- packed route


class ValidityContext:
    """Arrays describing everything a candidate segment must clear, packed for the kernels."""

    def __init__(self, model: SystemModel, fp: Footprint, ws: Workspace,
                 dyn_obstacles: Sequence[DynamicObstacle] = (),
                 constraints: Sequence[Constraint] = ()):
        _check_dim(fp, ws)
        self.model = model
        self.fp = fp
        self.ws = ws
        self.dyn_obstacles = list(dyn_obstacles)
        self.constraints = list(constraints)
        movers = self.dyn_obstacles + [c.as_obstacle() for c in self.constraints]
        n = model.state_dim
        d = ws.dim
        m = len(movers)
        lmax = max([len(o.states) for o in movers] + [1])
        mo_states = np.zeros((m, lmax, n))
        mo_k0 = np.zeros(m, dtype=np.int64)
        mo_len = np.ones(m, dtype=np.int64)
        mo_hold = np.zeros(m, dtype=np.bool_)
        mo_fp = np.zeros((m, 3))
        mo_lo = np.zeros((m, d))
        mo_hi = np.zeros((m, d))
        for i, o in enumerate(movers):
            L = len(o.states)
            mo_states[i, :L] = o.states
            mo_k0[i] = o.start_step
            mo_len[i] = L
            mo_hold[i] = o.hold
            mo_fp[i] = o.footprint.encode()
            r = o.footprint.radius
            mo_lo[i] = o.states[:, :d].min(axis=0) - r
            mo_hi[i] = o.states[:, :d].max(axis=0) + r
        self.fp_enc = fp.encode()
        self.rad = fp.radius
        self.args = (
            np.ascontiguousarray(model.state_lo), np.ascontiguousarray(model.state_hi),
            self.fp_enc, self.rad, ws.lo, ws.hi,
            np.ascontiguousarray(ws.obs_lo), np.ascontiguousarray(ws.obs_hi),
            mo_states, mo_k0, mo_len, mo_hold, mo_fp, mo_lo, mo_hi,
        )
        self.moving_args = (self.fp_enc, self.rad, mo_states, mo_k0, mo_len, mo_hold,
                            mo_fp, mo_lo, mo_hi)

    def with_constraint(self, constraint: Constraint) -> "ValidityContext":
        return ValidityContext(self.model, self.fp, self.ws, self.dyn_obstacles,
                               self.constraints + [constraint])

    def states_valid(self, states, start_step: int = 0) -> bool:
        """State bounds plus static, dynamic-obstacle and constraint checks (kernel route)."""
        return bool(K.states_valid(np.ascontiguousarray(states, dtype=float), start_step, *self.args))

    def hold_valid(self, x, k_end: int) -> bool:
        """Parking at ``x`` from ``k_end`` on never meets a dynamic obstacle or active constraint."""
        return bool(K.hold_valid(np.ascontiguousarray(x, dtype=float), k_end, *self.moving_args))

    def static_ok(self, x) -> bool:
        f = self.fp_enc
        return not K.static_hit(float(x[0]), float(x[1]), float(x[2]), f[0], f[1], f[2],
                                self.ws.lo, self.ws.hi, self.args[6], self.args[7])
