"""Kinodynamic RRT with pluggable node extension (random best-of-K or KiTE).

The same tree search drives single-agent planning and centralized joint-state
planning: a tree node stores one state per agent, and a joint expansion asks
the extender for one proposal per agent, truncates them all to the shortest
proposed duration and keeps the result only if no pair of agents touches.
With one agent this is exactly the single-agent RRT.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from .dynamics import SystemId, SystemModel, TrajectorySegment
from .edge_bundle import DEFAULT_DELTA, DEFAULT_KEY_WEIGHTS, EdgeBundle, KeyIndex
from .geometry import Footprint, GoalRegion, ValidityContext

log = logging.getLogger(__name__)

DEFAULT_DIST_WEIGHTS = {
    SystemId.UC: (1.0, 1.0, 0.5),
    SystemId.SOC: (1.0, 1.0, 0.5, 0.2, 0.1),
    SystemId.DI: (1.0, 1.0, 1.0, 0.3, 0.3, 0.3),
}


class InvalidStartError(ValueError):
    """The start state is in collision or outside its bounds."""


@dataclass
class PlannerConfig:
    extension: str = "Rand"
    K: int = 10
    epsilon: float = 0.01
    skip: Optional[int] = None  # None: p = ceil(|C| / 10) at each expansion
    delta: Optional[float] = None
    key_weights: Optional[tuple] = None
    goal_bias: float = 0.05
    max_iterations: int = 50_000
    budget: float = 300.0
    dist_weights: Optional[tuple] = None
    t_max: float = 3.0

    def __post_init__(self):
        if self.extension not in ("Rand", "KiTE"):
            raise ValueError(f"unknown extension {self.extension!r}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.skip is not None and self.skip < 1:
            raise ValueError("skip factor must be at least 1")

    def resolved(self, model: SystemModel) -> "PlannerConfig":
        sid = model.system_id
        return replace(
            self,
            delta=DEFAULT_DELTA[sid] if self.delta is None else self.delta,
            key_weights=tuple(DEFAULT_KEY_WEIGHTS[sid] if self.key_weights is None else self.key_weights),
            dist_weights=tuple(DEFAULT_DIST_WEIGHTS[sid] if self.dist_weights is None else self.dist_weights),
        )


@dataclass
class Trajectory:
    start: np.ndarray
    segments: list
    dt: float = 0.1

    @property
    def nsteps(self) -> int:
        return sum(s.nsteps for s in self.segments)

    @property
    def duration(self) -> float:
        return self.nsteps * self.dt

    def states(self) -> np.ndarray:
        """All samples at dt resolution, from t=0 to the duration inclusive."""
        if not self.segments:
            return self.start[None, :].copy()
        return np.concatenate([self.segments[0].states[:1]] + [s.states[1:] for s in self.segments])

    def controls(self) -> np.ndarray:
        """Control applied over each dt step (one row per step)."""
        if not self.segments:
            return np.zeros((0, 0))
        return np.concatenate([np.repeat(s.control[None, :], s.nsteps, axis=0) for s in self.segments])

    def state_at_step(self, k: int) -> np.ndarray:
        s = self.states()
        return s[min(k, len(s) - 1)]


@dataclass
class TreeNode:
    id: int
    state: np.ndarray
    parent: Optional[int]
    incoming: Optional[TrajectorySegment]
    arrival_time: float
    candidate_set: Optional[set]


class Tree:
    """Growable tree of joint states; a single-agent tree has ``n_agents == 1``."""

    def __init__(self, roots: np.ndarray, dt: float, capacity: int = 1024):
        roots = np.atleast_2d(np.asarray(roots, dtype=float))
        self.n_agents, self.state_dim = roots.shape
        self.dt = dt
        self.states = np.empty((capacity, self.n_agents * self.state_dim))
        self.states[0] = roots.ravel()
        self.count = 1
        self.parent = [-1]
        self.step = [0]
        self.segments = [None]  # per node: list of per-agent segments
        self.cands = [[None] * self.n_agents]  # per node, per agent: [ids, alive, n_alive]

    def __len__(self):
        return self.count

    def agent_state(self, node: int, agent: int) -> np.ndarray:
        n = self.state_dim
        return self.states[node, agent * n:(agent + 1) * n]

    def add(self, parent: int, segs: Sequence[TrajectorySegment]) -> int:
        if self.count == len(self.states):
            grown = np.empty((2 * len(self.states), self.states.shape[1]))
            grown[: self.count] = self.states[: self.count]
            self.states = grown
        i = self.count
        self.states[i] = np.concatenate([s.states[-1] for s in segs])
        self.parent.append(parent)
        self.step.append(segs[0].end_step)
        self.segments.append(list(segs))
        self.cands.append([None] * self.n_agents)
        self.count += 1
        return i

    def path(self, node: int) -> list:
        out = []
        while node >= 0:
            out.append(node)
            node = self.parent[node]
        return out[::-1]

    def children(self) -> list:
        kids = [[] for _ in range(self.count)]
        for i in range(1, self.count):
            kids[self.parent[i]].append(i)
        return kids

    def node(self, i: int, agent: int = 0) -> TreeNode:
        c = self.cands[i][agent]
        cand = None if c is None else set(c[0][c[1]].tolist())
        seg = None if self.segments[i] is None else self.segments[i][agent]
        return TreeNode(i, self.agent_state(i, agent).copy(), None if i == 0 else self.parent[i],
                        seg, self.step[i] * self.dt, cand)

    def keep(self, mask: np.ndarray) -> "Tree":
        """Copy holding only the nodes where ``mask`` is set; parents must be kept with children."""
        ids = np.flatnonzero(mask)
        remap = {int(old): new for new, old in enumerate(ids)}
        out = Tree.__new__(Tree)
        out.n_agents, out.state_dim, out.dt = self.n_agents, self.state_dim, self.dt
        out.states = np.empty((max(1024, 2 * len(ids)), self.states.shape[1]))
        out.states[: len(ids)] = self.states[ids]
        out.count = len(ids)
        out.parent = [remap[self.parent[i]] if self.parent[i] >= 0 else -1 for i in ids]
        out.step = [self.step[i] for i in ids]
        out.segments = [self.segments[i] for i in ids]
        out.cands = [[None if c is None else [c[0], c[1].copy(), c[2]] for c in self.cands[i]]
                     for i in ids]
        return out


@dataclass
class Extension:
    accepted: bool
    state: Optional[np.ndarray] = None
    segment: Optional[TrajectorySegment] = None


@dataclass
class ExtendStats:
    calls: int = 0
    eps_random: int = 0
    empty_random: int = 0
    exhausted_random: int = 0
    bundle_hits: int = 0
    attempts: int = 0


def dist(a, b, weights, angle_mask) -> float:
    """Weighted Euclidean state distance; angle differences wrap to [0, pi]."""
    return float(K.weighted_dist(np.asarray(a, dtype=float), np.asarray(b, dtype=float),
                                 np.asarray(weights, dtype=float), np.asarray(angle_mask, dtype=np.bool_)))


def select_node(tree: Tree, x_rand, weights, angle_mask) -> int:
    """Nearest node under the weighted metric; the lowest id wins ties."""
    w = np.tile(np.asarray(weights, dtype=float), tree.n_agents)
    wrap = np.tile(np.asarray(angle_mask, dtype=np.bool_), tree.n_agents)
    return int(K.nearest(tree.states, tree.count, np.asarray(x_rand, dtype=float), w, wrap))


class RandExtender:
    """Best-of-K random (control, duration) rollouts."""

    def __init__(self, model: SystemModel, config: PlannerConfig):
        self.model = model
        self.K = config.K
        self.nmax = int(math.floor(config.t_max / model.dt + 1e-9))
        self.w = np.asarray(config.dist_weights, dtype=float)
        self.wrap = model.angle_mask
        self.stats = ExtendStats()

    def rollouts(self, x, k0, target, ctx: ValidityContext, rng, K_=None):
        m = self.model
        k = self.K if K_ is None else K_
        # one draw per rollout: control components, then the duration in steps
        r = rng.random((k, m.control_dim + 1))
        controls = m.control_lo + (m.control_hi - m.control_lo) * r[:, :-1]
        steps = np.minimum((r[:, -1] * self.nmax).astype(np.int64) + 1, self.nmax)
        j, states = K.rand_rollouts(m.code, m.wheelbase, m.dt, x, k0, controls, steps, target,
                                    self.w, self.wrap, *ctx.args)
        if j < 0:
            return None
        return controls[j], states

    def propose(self, tree: Tree, node: int, agent: int, x, k0, target, ctx, rng):
        self.stats.calls += 1
        return self.rollouts(x, k0, target, ctx, rng)


class KiteExtender(RandExtender):
    """Retrieve delta-near bundle edges, rank by predicted endpoint, try them at stride p."""

    def __init__(self, model: SystemModel, config: PlannerConfig, bundle: EdgeBundle,
                 index: Optional[KeyIndex] = None):
        super().__init__(model, config)
        if bundle.system_id != model.system_id:
            raise ValueError(f"bundle is for {bundle.system_id.value}, planner is {model.system_id.value}")
        self.bundle = bundle
        self.index = index if index is not None else KeyIndex(bundle, config.key_weights)
        self.delta = config.delta
        self.eps = config.epsilon
        self.skip = config.skip or 0
        self.dw = model.workspace_dim

    def candidates(self, tree: Tree, node: int, agent: int, x):
        c = tree.cands[node][agent]
        if c is None:
            ids = self.index.query(x[self.dw:], self.delta)
            c = [ids, np.ones(len(ids), dtype=np.bool_), len(ids)]
            tree.cands[node][agent] = c
        return c

    def propose(self, tree: Tree, node: int, agent: int, x, k0, target, ctx, rng):
        st = self.stats
        st.calls += 1
        if rng.random() < self.eps:
            st.eps_random += 1
            return self.rollouts(x, k0, target, ctx, rng, 1)
        c = self.candidates(tree, node, agent, x)
        if c[2] == 0:
            st.empty_random += 1
            return self.rollouts(x, k0, target, ctx, rng, 1)
        m = self.model
        b = self.bundle
        e, states, n_att = K.kite_attempts(m.code, m.wheelbase, m.dt, x, k0, c[0], c[1], self.skip,
                                           b.controls, b.steps, b.terminals, self.dw, target,
                                           self.w, self.wrap, *ctx.args)
        c[2] -= n_att
        st.attempts += n_att
        if e >= 0:
            st.bundle_hits += 1
            return b.controls[e], states
        st.exhausted_random += 1
        return self.rollouts(x, k0, target, ctx, rng, 1)


def make_extender(model, config: PlannerConfig, bundle=None, index=None):
    if config.extension == "KiTE":
        if bundle is None:
            raise ValueError("KiTE extension needs an edge bundle")
        return KiteExtender(model, config, bundle, index)
    if bundle is not None:
        raise ValueError("an edge bundle was given but the extension is Rand")
    return RandExtender(model, config)


def _as_extension(model, res, k0) -> Extension:
    if res is None:
        return Extension(False)
    u, states = res
    seg = TrajectorySegment(np.asarray(u, dtype=float).copy(), len(states) - 1, states, k0, model.dt)
    return Extension(True, states[-1].copy(), seg)


def rand_extend(model: SystemModel, x, x_rand, K_: int, ctx: ValidityContext, rng,
                config: Optional[PlannerConfig] = None, start_step: int = 0) -> Extension:
    """Best-of-K random rollout from ``x`` toward ``x_rand``."""
    config = (config or PlannerConfig()).resolved(model)
    ext = RandExtender(model, replace(config, K=K_))
    x = np.ascontiguousarray(x, dtype=float)
    return _as_extension(model, ext.rollouts(x, start_step, np.asarray(x_rand, dtype=float), ctx, rng),
                         start_step)


def kite_extend(tree: Tree, node: int, x_rand, extender: KiteExtender, ctx: ValidityContext,
                rng, agent: int = 0) -> Extension:
    """One KiTE expansion of ``tree`` node ``node``; mutates the node's candidate set."""
    x = np.ascontiguousarray(tree.agent_state(node, agent))
    k0 = tree.step[node]
    res = extender.propose(tree, node, agent, x, k0, np.asarray(x_rand, dtype=float), ctx, rng)
    return _as_extension(extender.model, res, k0)


class StateSampler:
    """Uniform samples over each agent's free positions, drawn in batches.

    Positions are rejection-sampled against static obstacles only; remainder
    components are uniform in their bounds. With probability ``goal_bias``
    every agent's target is its goal center.
    """

    def __init__(self, model: SystemModel, ctxs, goals, goal_bias, rng, batch=256):
        self.model = model
        self.ctxs = ctxs
        self.goals = [np.asarray(g.center, dtype=float) for g in goals]
        self.goal_bias = goal_bias
        self.rng = np.random.default_rng(int(rng.integers(2**63)))
        self.batch = batch
        self.pool = [np.zeros((0, model.state_dim)) for _ in ctxs]
        self.pos = [0] * len(ctxs)

    def _refill(self, a):
        m = self.model
        ws = self.ctxs[a].ws
        for _ in range(100):
            xs = np.empty((self.batch, m.state_dim))
            xs[:, : m.workspace_dim] = self.rng.uniform(ws.lo, ws.hi, size=(self.batch, m.workspace_dim))
            xs[:, m.workspace_dim:] = m.sample_rem(self.rng, self.batch)
            a_ = self.ctxs[a].args
            free = K.static_free_batch(xs, a_[2], a_[4], a_[5], a_[6], a_[7])
            if free.any():
                self.pool[a] = xs[free]
                self.pos[a] = 0
                return
        self.pool[a] = xs
        self.pos[a] = 0

    def sample(self) -> np.ndarray:
        m = self.model
        goal = self.goal_bias > 0 and self.rng.random() < self.goal_bias
        out = []
        for a in range(len(self.ctxs)):
            if self.pos[a] >= len(self.pool[a]):
                self._refill(a)
            x = self.pool[a][self.pos[a]].copy()
            self.pos[a] += 1
            if goal:
                x[: m.workspace_dim] = self.goals[a]
            out.append(x)
        return np.concatenate(out)


@dataclass
class PlanResult:
    success: bool
    trajectories: Optional[list]
    tree: Tree
    iterations: int
    elapsed: float
    status: str
    stats: ExtendStats = field(default_factory=ExtendStats)

    @property
    def trajectory(self) -> Optional[Trajectory]:
        return self.trajectories[0] if self.trajectories else None


def extract(tree: Tree, node: int, starts) -> list:
    ids = tree.path(node)[1:]
    return [Trajectory(np.asarray(starts[a], dtype=float).copy(),
                       [tree.segments[i][a] for i in ids], tree.dt)
            for a in range(tree.n_agents)]


def rrt(model: SystemModel, ctxs: Sequence[ValidityContext], starts, goals: Sequence[GoalRegion],
        extender, config: PlannerConfig, rng, tree: Optional[Tree] = None,
        deadline: Optional[float] = None) -> PlanResult:
    """Joint-state RRT over ``len(ctxs)`` agents (one agent: plain kinodynamic RRT)."""
    t0 = time.perf_counter()
    if deadline is None:
        deadline = t0 + config.budget
    N = len(ctxs)
    n = model.state_dim
    dw = model.workspace_dim
    starts = [np.ascontiguousarray(s, dtype=float) for s in starts]
    for a, (s, ctx) in enumerate(zip(starts, ctxs)):
        if s.shape != (n,) or not ctx.states_valid(s[None, :], 0):
            raise InvalidStartError(f"start state of agent {a} is invalid")
    if tree is None:
        tree = Tree(np.stack(starts), model.dt)
    w = np.tile(np.asarray(config.dist_weights, dtype=float), N)
    wrap = np.tile(model.angle_mask, N)
    fps = np.stack([c.fp_enc for c in ctxs])
    centers = [np.asarray(g.center, dtype=float) for g in goals]
    radii = [g.radius for g in goals]
    perf = time.perf_counter

    def accepts(node):
        k_end = tree.step[node]
        for a in range(N):
            x = tree.states[node, a * n:(a + 1) * n]
            if math.dist(x[:dw], centers[a]) > radii[a] or not ctxs[a].hold_valid(x, k_end):
                return False
        return True

    # a start inside its goal, or a reused tree, may already hold an answer
    for node in range(tree.count):
        if accepts(node):
            return PlanResult(True, extract(tree, node, starts), tree, 0, perf() - t0, "solved",
                              extender.stats)
    sampler = StateSampler(model, ctxs, goals, config.goal_bias, rng)
    status = "iterations"
    it = 0
    for it in range(1, config.max_iterations + 1):
        if perf() > deadline:
            status = "timeout"
            break
        x_rand = sampler.sample()
        v = int(K.nearest(tree.states, tree.count, x_rand, w, wrap))
        k0 = tree.step[v]
        props = []
        for a in range(N):
            xa = tree.states[v, a * n:(a + 1) * n]
            res = extender.propose(tree, v, a, xa, k0, x_rand[a * n:(a + 1) * n], ctxs[a], rng)
            if res is None:
                break
            props.append(res)
        if len(props) < N:
            continue
        tmin = min(len(st) - 1 for _, st in props)
        if N > 1:
            joint = np.stack([st[: tmin + 1] for _, st in props])
            if not K.joint_pairs_clear(joint, tmin, fps):
                continue
        segs = [TrajectorySegment(np.asarray(u, dtype=float).copy(), tmin,
                                  st if len(st) == tmin + 1 else st[: tmin + 1].copy(), k0, model.dt)
                for u, st in props]
        node = tree.add(v, segs)
        if accepts(node):
            return PlanResult(True, extract(tree, node, starts), tree, it, perf() - t0, "solved",
                              extender.stats)
    return PlanResult(False, None, tree, it, perf() - t0, status, extender.stats)


_plan_observers = []


def add_plan_observer(fn):
    """Call ``fn(problem, result)`` after every successful :func:`plan`.

    ``problem`` is a dict with the model, workspace, footprint, start, goal,
    dynamic obstacles and constraints of the call. Useful for auditing.
    """
    _plan_observers.append(fn)
    return fn


def remove_plan_observer(fn) -> None:
    _plan_observers.remove(fn)


def plan(model: SystemModel, ws, fp: Footprint, start, goal: GoalRegion, dyn_obstacles=(),
         constraints=(), bundle: Optional[EdgeBundle] = None, config: Optional[PlannerConfig] = None,
         rng=None, index: Optional[KeyIndex] = None, tree: Optional[Tree] = None,
         deadline: Optional[float] = None, extender=None) -> PlanResult:
    """Single-agent kinodynamic RRT; ``result.trajectory`` is None when infeasible."""
    config = (config or PlannerConfig()).resolved(model)
    rng = rng if rng is not None else np.random.default_rng()
    ctx = ValidityContext(model, fp, ws, dyn_obstacles, constraints)
    if extender is None:
        extender = make_extender(model, config, bundle, index)
    res = rrt(model, [ctx], [start], [goal], extender, config, rng, tree, deadline)
    if res.success and _plan_observers:
        problem = dict(model=model, ws=ws, fp=fp, start=np.asarray(start, dtype=float), goal=goal,
                       dyn_obstacles=list(dyn_obstacles), constraints=list(constraints))
        for fn in list(_plan_observers):
            fn(problem, res)
    return res
