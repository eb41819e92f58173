"""Multi-robot coordination on top of the single-agent planner.

Three paradigms share one problem description and one result type:

* ``crrt_plan``: one joint-state RRT over all agents (T_min synchronised).
* ``prrt_plan``: agents planned one after another in index order, each
  treating the already committed agents as moving obstacles.
* ``kcbs_plan``: conflict-based search whose low level is the kinodynamic
  RRT under per-agent constraints, with optional reuse of pruned trees.

Time is kept on the integer dt grid throughout; every trajectory starts at
step 0 and, once finished, holds its final state.
"""

from __future__ import annotations

import heapq
import itertools
import json
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .dynamics import SystemModel, TrajectorySegment
from .edge_bundle import EdgeBundle, KeyIndex
from .geometry import (Constraint, DynamicObstacle, Footprint, ValidityContext, Workspace,
                       agents_collide, static_collides)
from .planner import (InvalidStartError, PlannerConfig, Trajectory, Tree, make_extender, rrt)

SOLUTION_FORMAT = "kiteplan.solution"
SOLUTION_VERSION = 1


@dataclass
class ProblemInstance:
    model: SystemModel
    workspace: Workspace
    footprints: list
    starts: list
    goals: list

    def __post_init__(self):
        self.starts = [np.asarray(s, dtype=float) for s in self.starts]
        if not (len(self.footprints) == len(self.starts) == len(self.goals)):
            raise ValueError("footprints, starts and goals must have one entry per agent")
        if not self.starts:
            raise ValueError("a problem needs at least one agent")

    @property
    def n_agents(self) -> int:
        return len(self.starts)

    def check(self) -> None:
        """Raise ``InvalidStartError`` unless every start is statically valid and pairwise clear."""
        for i, (fp, s) in enumerate(zip(self.footprints, self.starts)):
            if s.shape != (self.model.state_dim,):
                raise InvalidStartError(f"agent {i}: start has shape {s.shape}")
            if static_collides(fp, s, self.workspace):
                raise InvalidStartError(f"agent {i}: start collides with the static scene")
        for i, j in itertools.combinations(range(self.n_agents), 2):
            if agents_collide(self.footprints[i], self.starts[i], self.footprints[j], self.starts[j]):
                raise InvalidStartError(f"agents {i} and {j} overlap at their starts")

    def context(self, agent: int, dyn_obstacles=(), constraints=()) -> ValidityContext:
        return ValidityContext(self.model, self.footprints[agent], self.workspace,
                               dyn_obstacles, constraints)


@dataclass
class Solution:
    trajectories: list

    @property
    def durations(self) -> list:
        return [t.duration for t in self.trajectories]

    @property
    def path_time(self) -> float:
        """Team path time: the sum of individual trajectory durations."""
        return float(sum(t.nsteps for t in self.trajectories) * self.trajectories[0].dt)

    def to_dict(self, model: SystemModel, metadata: Optional[dict] = None) -> dict:
        agents = []
        for tr in self.trajectories:
            states = tr.states()
            agents.append({
                "start": tr.start.tolist(),
                "duration": tr.duration,
                "segments": [{"control": s.control.tolist(), "steps": s.nsteps}
                             for s in tr.segments],
                "t": [k * tr.dt for k in range(len(states))],
                "states": states.tolist(),
                "controls": tr.controls().tolist(),
            })
        return {
            "format": SOLUTION_FORMAT,
            "version": SOLUTION_VERSION,
            "system": model.system_id.value,
            "dt": model.dt,
            "path_time": self.path_time,
            "agents": agents,
            "metadata": metadata or {},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Solution":
        if data.get("format") != SOLUTION_FORMAT:
            raise ValueError("not a solution file")
        if data.get("version") != SOLUTION_VERSION:
            raise ValueError(f"unsupported solution version {data.get('version')}")
        dt = float(data["dt"])
        trajs = []
        for a in data["agents"]:
            states = np.asarray(a["states"], dtype=float)
            segs = []
            k = 0
            for s in a["segments"]:
                n = int(s["steps"])
                segs.append(TrajectorySegment(np.asarray(s["control"], dtype=float), n,
                                              states[k:k + n + 1].copy(), k, dt))
                k += n
            trajs.append(Trajectory(np.asarray(a["start"], dtype=float), segs, dt))
        return cls(trajs)


def save_solution(solution: Solution, model: SystemModel, path, metadata=None) -> None:
    with open(path, "w") as f:
        json.dump(solution.to_dict(model, metadata), f)


def load_solution(path) -> Solution:
    with open(path) as f:
        return Solution.from_dict(json.load(f))


@dataclass
class MRMPResult:
    success: bool
    solution: Optional[Solution]
    status: str
    elapsed: float
    iterations: int = 0
    expansions: int = 0  # high-level conflict-tree expansions (KCBS)
    conflicts: int = 0
    failed_agent: Optional[int] = None
    extend_calls: int = 0

    @property
    def path_time(self) -> Optional[float]:
        return self.solution.path_time if self.solution else None


_solution_observers = []


def add_solution_observer(fn):
    """Call ``fn(instance, result)`` after every successful multi-robot solve."""
    _solution_observers.append(fn)
    return fn


def remove_solution_observer(fn) -> None:
    _solution_observers.remove(fn)


def _notify(instance, result: MRMPResult) -> MRMPResult:
    if result.success:
        for fn in list(_solution_observers):
            fn(instance, result)
    return result


def _prepare(instance, config, rng):
    config = (config or PlannerConfig()).resolved(instance.model)
    rng = rng if rng is not None else np.random.default_rng()
    instance.check()
    return config, rng


def _deadline(config, t0):
    return t0 + config.budget


# ------------------------------------------------------------------ cRRT


def crrt_plan(instance: ProblemInstance, bundle: Optional[EdgeBundle] = None,
              config: Optional[PlannerConfig] = None, rng=None,
              index: Optional[KeyIndex] = None) -> MRMPResult:
    """Centralised joint-state RRT; every joint edge lasts T_min of the per-agent proposals."""
    t0 = time.perf_counter()
    config, rng = _prepare(instance, config, rng)
    ext = make_extender(instance.model, config, bundle, index)
    ctxs = [instance.context(a) for a in range(instance.n_agents)]
    res = rrt(instance.model, ctxs, instance.starts, instance.goals, ext, config, rng,
              deadline=_deadline(config, t0))
    elapsed = time.perf_counter() - t0
    sol = Solution(res.trajectories) if res.success else None
    return _notify(instance, MRMPResult(res.success, sol, res.status, elapsed, res.iterations,
                                        extend_calls=ext.stats.calls))


# ------------------------------------------------------------------ pRRT


def committed_obstacle(fp: Footprint, traj: Trajectory) -> DynamicObstacle:
    return DynamicObstacle(fp, traj.states(), 0, hold=True, dt=traj.dt)


def prrt_plan(instance: ProblemInstance, bundle: Optional[EdgeBundle] = None,
              config: Optional[PlannerConfig] = None, rng=None,
              index: Optional[KeyIndex] = None) -> MRMPResult:
    """Plan agents in index order against all previously committed trajectories."""
    t0 = time.perf_counter()
    config, rng = _prepare(instance, config, rng)
    deadline = _deadline(config, t0)
    ext = make_extender(instance.model, config, bundle, index)
    committed = []
    trajs = []
    iters = 0
    for a in range(instance.n_agents):
        ctx = instance.context(a, dyn_obstacles=committed)
        res = rrt(instance.model, [ctx], [instance.starts[a]], [instance.goals[a]], ext, config,
                  rng, deadline=deadline)
        iters += res.iterations
        if not res.success:
            return MRMPResult(False, None, res.status, time.perf_counter() - t0, iters,
                              failed_agent=a, extend_calls=ext.stats.calls)
        trajs.append(res.trajectory)
        committed.append(committed_obstacle(instance.footprints[a], res.trajectory))
    return _notify(instance, MRMPResult(True, Solution(trajs), "solved", time.perf_counter() - t0,
                                        iters, extend_calls=ext.stats.calls))


# ------------------------------------------------------------------ KCBS


@dataclass(frozen=True)
class Conflict:
    i: int
    j: int
    k_start: int
    k_end: int
    dt: float = 0.1

    @property
    def t_start(self) -> float:
        return self.k_start * self.dt

    @property
    def t_end(self) -> float:
        return (self.k_end + 1) * self.dt


def _pad(trajs: Sequence[Trajectory]):
    states = [t.states() for t in trajs]
    lens = np.array([len(s) for s in states], dtype=np.int64)
    out = np.zeros((len(states), int(lens.max()), states[0].shape[1]))
    for a, s in enumerate(states):
        out[a, : len(s)] = s
    return out, lens


def detect_first_conflict(trajectories: Sequence[Trajectory], footprints: Sequence[Footprint]
                          ) -> Optional[Conflict]:
    """Earliest colliding pair (lowest step, then lowest pair) and its maximal colliding run."""
    if len(trajectories) < 2:
        return None
    padded, lens = _pad(trajectories)
    fps = np.stack([f.encode() for f in footprints])
    i, j, ks, ke = K.first_conflict(padded, lens, fps)
    if i < 0:
        return None
    return Conflict(int(i), int(j), int(ks), int(ke), trajectories[0].dt)


def constraint_from(conflict: Conflict, agent: int, other: int, other_traj: Trajectory,
                    other_fp: Footprint) -> Constraint:
    """``agent`` must avoid ``other`` (terminal hold included) over the conflict interval."""
    states = other_traj.states()
    idx = np.minimum(np.arange(conflict.k_start, conflict.k_end + 1), len(states) - 1)
    return Constraint(agent, conflict.k_start, conflict.k_end, other_fp, states[idx].copy(),
                      other, other_traj.dt)


def prune_tree(tree: Tree, k_start: int, ctx: ValidityContext) -> Tree:
    """Drop every node whose incoming edge spans step ``k_start``, plus descendants.

    An edge covering ``[arrival - duration, arrival]`` overlaps ``k_start``
    exactly when it starts at or before it and arrives at or after it; since
    time increases along every branch, the survivors are the nodes arriving
    strictly before ``k_start``. Surviving edges are then re-checked against
    ``ctx`` and violators are removed together with their subtrees.
    """
    keep = np.zeros(tree.count, dtype=bool)
    keep[0] = True
    for v in range(1, tree.count):
        # parents always precede children, so one forward pass suffices
        if not keep[tree.parent[v]] or tree.step[v] >= k_start:
            continue
        seg = tree.segments[v][0]
        keep[v] = ctx.states_valid(seg.states, seg.start_step)
    return tree.keep(keep)


@dataclass
class _CTNode:
    cost_steps: int
    constraints: list  # per agent: list of Constraint
    trajectories: list
    trees: list  # per agent Tree, kept only when pruning is on
    depth: int = 0
    parent: Optional["_CTNode"] = None


def kcbs_plan(instance: ProblemInstance, bundle: Optional[EdgeBundle] = None,
              config: Optional[PlannerConfig] = None, rng=None,
              index: Optional[KeyIndex] = None, pruning: bool = False) -> MRMPResult:
    """Conflict-based search with a kinodynamic RRT low level, ordered by team path time.

    Ties in team path time are broken first-in first-out. Both children of a
    conflict are generated; a child whose low-level search fails is dropped.
    With ``pruning`` the constrained agent's previous tree is pruned at the
    conflict start and the search resumes from what survives.
    """
    t0 = time.perf_counter()
    config, rng = _prepare(instance, config, rng)
    deadline = _deadline(config, t0)
    model = instance.model
    N = instance.n_agents
    ext = make_extender(model, config, bundle, index)
    iters = 0

    def low_level(a, constraints, tree=None):
        nonlocal iters
        ctx = instance.context(a, constraints=constraints)
        res = rrt(model, [ctx], [instance.starts[a]], [instance.goals[a]], ext, config, rng,
                  tree=tree, deadline=deadline)
        iters += res.iterations
        return res

    def result(ok, sol, status, expansions, conflicts, failed=None):
        return _notify(instance, MRMPResult(ok, sol, status, time.perf_counter() - t0, iters,
                                            expansions, conflicts, failed, ext.stats.calls))

    trajs, trees = [], []
    for a in range(N):
        res = low_level(a, [])
        if not res.success:
            return result(False, None, res.status, 0, 0, a)
        trajs.append(res.trajectory)
        trees.append(res.tree if pruning else None)
    root = _CTNode(sum(t.nsteps for t in trajs), [[] for _ in range(N)], trajs, trees)
    counter = itertools.count()
    heap = [(root.cost_steps, next(counter), root)]
    expansions = 0
    conflicts = 0
    while heap:
        if time.perf_counter() > deadline:
            return result(False, None, "timeout", expansions, conflicts)
        _, _, node = heapq.heappop(heap)
        conflict = detect_first_conflict(node.trajectories, instance.footprints)
        if conflict is None:
            return result(True, Solution(node.trajectories), "solved", expansions, conflicts)
        expansions += 1
        conflicts += 1
        for a, b in ((conflict.i, conflict.j), (conflict.j, conflict.i)):
            c = constraint_from(conflict, a, b, node.trajectories[b], instance.footprints[b])
            cons = node.constraints[a] + [c]
            tree = None
            if pruning:
                tree = prune_tree(node.trees[a], conflict.k_start, instance.context(a, constraints=[c]))
            res = low_level(a, cons, tree)
            if not res.success:
                if res.status == "timeout":
                    return result(False, None, "timeout", expansions, conflicts)
                continue
            trajs = list(node.trajectories)
            trajs[a] = res.trajectory
            all_cons = list(node.constraints)
            all_cons[a] = cons
            child_trees = list(node.trees)
            if pruning:
                child_trees[a] = res.tree
            child = _CTNode(sum(t.nsteps for t in trajs), all_cons, trajs, child_trees,
                            node.depth + 1, node)
            heapq.heappush(heap, (child.cost_steps, next(counter), child))
    return result(False, None, "exhausted", expansions, conflicts)


PLANNERS = {"cRRT": crrt_plan, "pRRT": prrt_plan, "KCBS": kcbs_plan}


def solve(name: str, instance: ProblemInstance, bundle=None, config=None, rng=None, index=None,
          pruning: bool = False) -> MRMPResult:
    if name not in PLANNERS:
        raise ValueError(f"unknown planner {name!r}; choose from {sorted(PLANNERS)}")
    if name == "KCBS":
        return kcbs_plan(instance, bundle, config, rng, index, pruning=pruning)
    if pruning:
        raise ValueError("pruning applies to KCBS only")
    return PLANNERS[name](instance, bundle, config, rng, index)
