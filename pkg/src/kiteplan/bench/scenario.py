"""Benchmark scenarios: procedural templates and the versioned JSON format."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..dynamics import SystemId, get_model
from ..geometry import Footprint, GoalRegion, Workspace, agents_collide, static_collides
from ..mrmp import ProblemInstance

SCENARIO_FORMAT = "kiteplan.scenario"
SCENARIO_VERSION = 1
RECIPE_VERSION = 1

TEMPLATES = ("Swap2D", "Swap3D", "NarrowCorridor", "SmallCluttered", "LargeCluttered",
             "LargeCluttered3D")
_THREE_D = {"Swap3D", "LargeCluttered3D"}

GOAL_RADIUS = 0.5
NARROW_GOAL_RADIUS = 0.25


class ScenarioError(ValueError):
    """A template cannot host the request, or placement ran out of attempts."""


@dataclass
class AgentSpec:
    start: list
    goal: list
    goal_radius: float
    footprint: Footprint


@dataclass
class Scenario:
    name: str
    system: SystemId
    lo: list
    hi: list
    obstacles: list  # [(lo, hi), ...]
    agents: list
    recipe: dict = field(default_factory=dict)

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    def workspace(self) -> Workspace:
        return Workspace(self.lo, self.hi, [(list(a), list(b)) for a, b in self.obstacles])

    def to_instance(self) -> ProblemInstance:
        return ProblemInstance(
            get_model(self.system), self.workspace(),
            [a.footprint for a in self.agents],
            [np.asarray(a.start, dtype=float) for a in self.agents],
            [GoalRegion(tuple(a.goal), a.goal_radius) for a in self.agents],
        )

    def to_dict(self) -> dict:
        return {
            "format": SCENARIO_FORMAT,
            "version": SCENARIO_VERSION,
            "name": self.name,
            "system": self.system.value,
            "workspace": {"lo": list(self.lo), "hi": list(self.hi)},
            "obstacles": [{"lo": list(a), "hi": list(b)} for a, b in self.obstacles],
            "agents": [{"start": list(a.start), "goal": list(a.goal), "goal_radius": a.goal_radius,
                        "footprint": a.footprint.to_dict()} for a in self.agents],
            "recipe": self.recipe,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        if d.get("format") != SCENARIO_FORMAT:
            raise ValueError("not a scenario file")
        if d.get("version") != SCENARIO_VERSION:
            raise ValueError(f"unsupported scenario version {d.get('version')}")
        agents = [AgentSpec([float(v) for v in a["start"]], [float(v) for v in a["goal"]],
                            float(a["goal_radius"]),
                            Footprint(a["footprint"]["kind"], float(a["footprint"]["a"]),
                                      float(a["footprint"].get("b", 0.0))))
                  for a in d["agents"]]
        return cls(d["name"], SystemId(d["system"]),
                   [float(v) for v in d["workspace"]["lo"]], [float(v) for v in d["workspace"]["hi"]],
                   [([float(v) for v in o["lo"]], [float(v) for v in o["hi"]]) for o in d["obstacles"]],
                   agents, d.get("recipe", {}))

    def __eq__(self, other):
        return isinstance(other, Scenario) and self.to_dict() == other.to_dict()


def save_scenario(s: Scenario, path) -> None:
    Path(path).write_text(json.dumps(s.to_dict(), indent=1))


def load_scenario(path) -> Scenario:
    return Scenario.from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------- templates


def _state(model, pos, heading=0.0):
    x = np.zeros(model.state_dim)
    x[: model.workspace_dim] = pos
    if model.workspace_dim == 2:
        x[2] = math.atan2(math.sin(heading), math.cos(heading))
    return [float(v) for v in x]


def _check_system(template, system):
    three = get_model(system).workspace_dim == 3
    if three != (template in _THREE_D):
        kind = "3D" if template in _THREE_D else "2D"
        raise ScenarioError(f"{template} is a {kind} template; {system.value} does not fit")


def _pairwise_clear(fp, points, margin=0.0):
    r = fp.radius
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            if math.dist(points[i], points[j]) < 2 * r + margin:
                return False
    return True


def _swap2d(model, fp, N, rng):
    lo, hi = [0.0, 0.0], [20.0, 20.0]
    c = np.array([10.0, 10.0])
    r = fp.radius
    # smallest ring that keeps neighbours a full diameter apart, never below 5 m
    need = (2 * r + 2 * r) / (2 * math.sin(math.pi / N)) if N > 1 else 0.0
    R = max(5.0, need)
    if R > 10.0 - r - GOAL_RADIUS:
        raise ScenarioError(f"Swap2D cannot fit {N} agents")
    agents = []
    for i in range(N):
        a = 2 * math.pi * i / N
        p = c + R * np.array([math.cos(a), math.sin(a)])
        agents.append(AgentSpec(_state(model, p, a + math.pi), [float(v) for v in 2 * c - p],
                                GOAL_RADIUS, fp))
    return lo, hi, [], agents, {"ring_radius": R}


def _fibonacci_sphere(n):
    golden = math.pi * (3.0 - math.sqrt(5.0))
    pts = []
    for i in range(n):
        z = 1.0 - 2.0 * (i + 0.5) / n
        rho = math.sqrt(max(0.0, 1.0 - z * z))
        pts.append((rho * math.cos(golden * i), rho * math.sin(golden * i), z))
    return np.array(pts)


def _swap3d(model, fp, N, rng):
    lo, hi = [0.0, 0.0, 0.0], [5.0, 5.0, 5.0]
    c = np.array([2.5, 2.5, 2.5])
    R = 2.0
    pts = c + R * _fibonacci_sphere(N)
    if not _pairwise_clear(fp, list(pts), margin=2 * fp.radius):
        raise ScenarioError(f"Swap3D cannot fit {N} agents")
    agents = [AgentSpec(_state(model, p), [float(v) for v in 2 * c - p], GOAL_RADIUS, fp) for p in pts]
    return lo, hi, [], agents, {"sphere_radius": R}


def _narrow(model, fp, N, rng):
    lo, hi = [0.0, 0.0], [5.0, 4.0]
    gap = 2 * fp.radius + 0.2  # one robot wide, with a little slack
    y0, y1 = 2.0 - gap / 2, 2.0 + gap / 2
    obstacles = [([2.2, 0.0], [2.8, y0]), ([2.2, y1], [2.8, 4.0])]
    n_left = (N + 1) // 2
    n_right = N // 2
    rows = max(n_left, n_right)
    spacing = 4.0 / (rows + 1)
    if spacing < 2 * fp.radius + 0.1:
        raise ScenarioError(f"NarrowCorridor cannot fit {N} agents")
    agents = []
    for i in range(N):
        left = i % 2 == 0
        y = spacing * (i // 2 + 1)
        # the mirror row on the far side is the goal, so the two sides must cross
        sx, gx = (1.0, 4.0) if left else (4.0, 1.0)
        agents.append(AgentSpec(_state(model, [sx, y], 0.0 if left else math.pi), [gx, y],
                                NARROW_GOAL_RADIUS, fp))
    return lo, hi, obstacles, agents, {"gap": gap}


_CLUTTER = {
    "SmallCluttered": dict(size=(15.0, 15.0), count=12, side=(0.8, 2.0)),
    "LargeCluttered": dict(size=(40.0, 40.0), count=40, side=(1.0, 3.0)),
    "LargeCluttered3D": dict(size=(14.0, 14.0, 10.0), count=25, side=(1.0, 3.0), height=(4.0, 10.0)),
}


def _cluttered(template, model, fp, N, rng, attempts=10_000):
    spec = _CLUTTER[template]
    size = np.array(spec["size"])
    d = size.size
    lo, hi = [0.0] * d, [float(v) for v in size]
    r = fp.radius
    margin = r + GOAL_RADIUS
    min_travel = min(size[:2]) / 3.0

    def draw_point(taken):
        for _ in range(attempts):
            p = rng.uniform(margin, size - margin)
            if all(math.dist(p, q) >= 4 * r for q in taken):
                return p
        raise ScenarioError(f"{template}: could not place {N} agents")

    starts, goals = [], []
    for _ in range(N):
        s = draw_point(starts)
        for _ in range(attempts):
            g = draw_point(goals)
            if math.dist(s, g) >= min_travel:
                break
        else:
            raise ScenarioError(f"{template}: no goal far enough from a start")
        starts.append(s)
        goals.append(g)
    headings = rng.uniform(-math.pi, math.pi, size=N)

    # obstacles keep one robot diameter of clearance around every start and goal
    clearance = fp.radius + 2 * r
    points = starts + goals
    obstacles = []
    for _ in range(spec["count"]):
        for _ in range(attempts):
            side = rng.uniform(*spec["side"], size=2)
            base = rng.uniform(0.0, size[:2] - side)
            blo = [float(base[0]), float(base[1])]
            bhi = [float(base[0] + side[0]), float(base[1] + side[1])]
            if d == 3:
                blo.append(0.0)
                bhi.append(float(rng.uniform(*spec["height"])))
            gap = np.maximum(np.maximum(np.array(blo) - np.array(points), 0.0),
                             np.array(points) - np.array(bhi))
            if np.any(np.linalg.norm(gap, axis=1) < clearance):
                continue
            obstacles.append((blo, bhi))
            break
        else:
            raise ScenarioError(f"{template}: could not place obstacles")
    agents = [AgentSpec(_state(model, s, h), [float(v) for v in g], GOAL_RADIUS, fp)
              for s, g, h in zip(starts, goals, headings)]
    return lo, hi, obstacles, agents, {"obstacle_count": spec["count"],
                                       "obstacle_side": list(spec["side"])}


def generate_scenario(template: str, system, N: int, seed: int = 0,
                      name: Optional[str] = None) -> Scenario:
    """Deterministic scenario for ``(template, system, N, seed)``."""
    if template not in TEMPLATES:
        raise ScenarioError(f"unknown template {template!r}; choose from {', '.join(TEMPLATES)}")
    if N < 1:
        raise ScenarioError("need at least one agent")
    system = SystemId(system)
    _check_system(template, system)
    model = get_model(system)
    fp = Footprint.for_model(model)
    rng = np.random.default_rng(seed)
    if template == "Swap2D":
        lo, hi, obs, agents, extra = _swap2d(model, fp, N, rng)
    elif template == "Swap3D":
        lo, hi, obs, agents, extra = _swap3d(model, fp, N, rng)
    elif template == "NarrowCorridor":
        lo, hi, obs, agents, extra = _narrow(model, fp, N, rng)
    else:
        lo, hi, obs, agents, extra = _cluttered(template, model, fp, N, rng)
    recipe = {"template": template, "seed": int(seed), "n_agents": int(N),
              "recipe_version": RECIPE_VERSION, **extra}
    sc = Scenario(name or f"{template}-{system.value}-N{N}-s{seed}", system, lo, hi, obs, agents,
                  recipe)
    check_scenario(sc)
    return sc


def check_scenario(sc: Scenario) -> None:
    """Raise ``ScenarioError`` unless starts are valid and clear and goal centres are free."""
    ws = sc.workspace()
    for i, a in enumerate(sc.agents):
        if static_collides(a.footprint, np.asarray(a.start), ws):
            raise ScenarioError(f"agent {i}: start collides with the static scene")
        probe = np.zeros(3)
        probe[: len(a.goal)] = a.goal
        point = Footprint.sphere(1e-9) if len(a.goal) == 3 else Footprint.circle(1e-9)
        if static_collides(point, probe, ws):
            raise ScenarioError(f"agent {i}: goal centre lies inside an obstacle")
    for i in range(sc.n_agents):
        for j in range(i + 1, sc.n_agents):
            a, b = sc.agents[i], sc.agents[j]
            if agents_collide(a.footprint, np.asarray(a.start), b.footprint, np.asarray(b.start)):
                raise ScenarioError(f"agents {i} and {j} overlap at their starts")
