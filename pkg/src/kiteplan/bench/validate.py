"""Independent feasibility check for multi-robot solutions.

Nothing here touches the compiled kernels: dynamics are re-integrated with a
plain-Python RK4 and collisions use the scalar predicates in ``geometry``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..dynamics import SystemId, SystemModel
from ..geometry import agents_collide, static_collides
from ..mrmp import ProblemInstance, Solution

STATE_TOL = 1e-9


@dataclass
class Violation:
    kind: str  # dynamics | control_bounds | state_bounds | timing | start | static | pairwise | goal
    agent: int
    step: int
    time: float
    detail: str
    other: int = -1


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, kind, agent, step, dt, detail, other=-1):
        self.violations.append(Violation(kind, agent, step, step * dt, detail, other))

    def kinds(self) -> set:
        return {v.kind for v in self.violations}

    def summary(self) -> str:
        if self.ok:
            return "valid: no violations"
        lines = [f"{len(self.violations)} violation(s)"]
        for v in self.violations[:50]:
            who = f"agent {v.agent}" + (f" vs {v.other}" if v.other >= 0 else "")
            lines.append(f"  {v.kind:<15} {who:<16} t={v.time:.1f}s (step {v.step}): {v.detail}")
        if len(self.violations) > 50:
            lines.append(f"  ... {len(self.violations) - 50} more")
        return "\n".join(lines)


def _wrap(a):
    a = math.fmod(a + math.pi, 2 * math.pi)
    if a <= 0:
        a += 2 * math.pi
    return a - math.pi


def _deriv(sid, wb, x, u):
    if sid == SystemId.UC:
        return [u[0] * math.cos(x[2]), u[0] * math.sin(x[2]), u[1]]
    if sid == SystemId.SOC:
        return [x[3] * math.cos(x[2]), x[3] * math.sin(x[2]), x[3] / wb * math.tan(x[4]), u[0], u[1]]
    return [x[3], x[4], x[5], u[0], u[1], u[2]]


def rk4_step(model: SystemModel, x, u):
    """One dt step of classic RK4 in pure Python, heading wrapped to (-pi, pi]."""
    h = model.dt
    sid, wb = model.system_id, model.wheelbase
    k1 = _deriv(sid, wb, x, u)
    k2 = _deriv(sid, wb, [a + 0.5 * h * b for a, b in zip(x, k1)], u)
    k3 = _deriv(sid, wb, [a + 0.5 * h * b for a, b in zip(x, k2)], u)
    k4 = _deriv(sid, wb, [a + h * b for a, b in zip(x, k3)], u)
    out = [a + h / 6.0 * (b + 2 * c + 2 * d + e) for a, b, c, d, e in zip(x, k1, k2, k3, k4)]
    for i in np.flatnonzero(model.angle_mask):
        out[i] = _wrap(out[i])
    return out


def _state_diff(model, a, b) -> float:
    worst = 0.0
    for i, (p, q) in enumerate(zip(a, b)):
        d = abs(p - q)
        if model.angle_mask[i]:
            d = min(d, 2 * math.pi - d)
        worst = max(worst, d)
    return worst


def validate_solution(instance: ProblemInstance, solution: Solution) -> ValidationReport:
    """List every feasibility violation of ``solution`` for ``instance``.

    Checks, for each agent: start match, dt-aligned segments, control bounds,
    re-integrated states within 1e-9, state bounds, static collisions at every
    sample and goal containment of the final state. Then every pair of agents
    is checked at every shared dt sample, each agent holding its final state
    after it finishes.
    """
    model = instance.model
    dt = model.dt
    rep = ValidationReport()
    if len(solution.trajectories) != instance.n_agents:
        rep.add("timing", -1, 0, dt, f"{len(solution.trajectories)} trajectories for "
                f"{instance.n_agents} agents")
        return rep
    sampled = []
    for a, tr in enumerate(solution.trajectories):
        fp = instance.footprints[a]
        states = tr.states()
        sampled.append(states)
        if _state_diff(model, states[0], instance.starts[a]) > STATE_TOL:
            rep.add("start", a, 0, dt, "trajectory does not begin at the start state")
        if abs(tr.dt - dt) > 1e-12:
            rep.add("timing", a, 0, dt, f"trajectory dt {tr.dt} differs from model dt {dt}")
        k = 0
        x = [float(v) for v in instance.starts[a]]
        for si, seg in enumerate(tr.segments):
            if seg.nsteps < 1 or len(seg.states) != seg.nsteps + 1 or seg.start_step != k:
                rep.add("timing", a, k, dt, f"segment {si} is not aligned to the dt grid")
            u = [float(v) for v in seg.control]
            if any(v < lo or v > hi for v, lo, hi in zip(u, model.control_lo, model.control_hi)):
                rep.add("control_bounds", a, k, dt, f"segment {si} control {u} out of bounds")
            for j in range(seg.nsteps):
                x = rk4_step(model, x, u)
                k += 1
                if k < len(states):
                    err = _state_diff(model, x, states[k])
                    if err > STATE_TOL:
                        rep.add("dynamics", a, k, dt, f"stored state differs by {err:.3g}")
                        x = [float(v) for v in states[k]]
        for k, s in enumerate(states):
            if np.any(s < model.state_lo) or np.any(s > model.state_hi):
                rep.add("state_bounds", a, k, dt, "state component outside its bounds")
            if static_collides(fp, s, instance.workspace):
                rep.add("static", a, k, dt, "footprint overlaps an obstacle or leaves the workspace")
        if not instance.goals[a].contains(states[-1]):
            rep.add("goal", a, len(states) - 1, dt, "final state is outside the goal region")
    horizon = max(len(s) for s in sampled)
    for i in range(instance.n_agents):
        for j in range(i + 1, instance.n_agents):
            si, sj = sampled[i], sampled[j]
            for k in range(horizon):
                xi = si[min(k, len(si) - 1)]
                xj = sj[min(k, len(sj) - 1)]
                if agents_collide(instance.footprints[i], xi, instance.footprints[j], xj):
                    rep.add("pairwise", i, k, dt, "footprints overlap", other=j)
    return rep
