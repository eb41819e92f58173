"""Translation-invariant edge bundles: generation, retrieval and persistence.

An edge is a constant-control motion started at the workspace origin. It is
stored as ``(key, control, steps, terminal)`` where ``key`` is the start
state's remainder (heading, velocities, steering). Only the terminal state is
kept; planners re-propagate edges from the actual node state.

File layout (little-endian)::

    header   magic "KITEBNDL", u32 version, u32 system code, f64 dt, f64 t_max,
             u64 seed, u64 edge count, u32 key dim, u32 control dim, u32 state dim
    records  E x (f64[key dim], f64[control dim], u32 steps, f64[state dim])
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels as K
from .dynamics import (MODELS, SystemId, SystemModel, get_model, sample_control,
                       sample_start_at_origin, sample_steps)

MAGIC = b"KITEBNDL"
VERSION = 1
_HEADER = struct.Struct("<8sIIddQQIII")
_SYSTEM_BY_CODE = {m.code: sid for sid, m in MODELS.items()}

# per-component key weights; the SOC weights make (0.3 rad, 0.2 m/s, 0.2 rad) one ball of radius 0.3
DEFAULT_KEY_WEIGHTS = {
    SystemId.UC: (1.0,),
    SystemId.SOC: (1.0, 1.5, 1.5),
    SystemId.DI: (1.0, 1.0, 1.0),
}
DEFAULT_DELTA = {SystemId.UC: 0.3, SystemId.SOC: 0.3, SystemId.DI: 0.15}
PAPER_SIZES = {SystemId.UC: 30_000, SystemId.SOC: 50_000, SystemId.DI: 100_000}


class BundleFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Edge:
    id: int
    key: np.ndarray
    control: np.ndarray
    steps: int
    terminal: np.ndarray
    dt: float

    @property
    def duration(self) -> float:
        return self.steps * self.dt


@dataclass
class EdgeBundle:
    system_id: SystemId
    keys: np.ndarray
    controls: np.ndarray
    steps: np.ndarray
    terminals: np.ndarray
    seed: int
    dt: float
    t_max: float

    @property
    def model(self) -> SystemModel:
        return get_model(self.system_id)

    def __len__(self):
        return len(self.steps)

    def edge(self, i: int) -> Edge:
        return Edge(int(i), self.keys[i], self.controls[i], int(self.steps[i]),
                    self.terminals[i], self.dt)

    def start_state(self, i: int) -> np.ndarray:
        return np.concatenate([np.zeros(self.model.workspace_dim), self.keys[i]])


def generate_bundle(model: SystemModel, n_edges: int, t_max: float = 3.0, seed: int = 0,
                    batch: int = 8192) -> EdgeBundle:
    """Rejection-sample ``n_edges`` dynamically feasible origin-anchored edges.

    Candidates are drawn in fixed-size batches from one seeded stream, so the
    result depends only on ``(model, n_edges, t_max, seed, batch)``.
    """
    if n_edges <= 0:
        raise ValueError("bundle size must be positive")
    rng = np.random.default_rng(seed)
    dw = model.workspace_dim
    keys, ctrls, stps, terms = [], [], [], []
    have = 0
    while have < n_edges:
        x0 = sample_start_at_origin(model, rng, size=batch)
        u = sample_control(model, rng, size=batch)
        st = sample_steps(model, t_max, rng, size=batch).astype(np.int64)
        ok, xf = K.batch_rollout_terminal(model.code, model.wheelbase, model.dt, x0, u, st,
                                          model.state_lo, model.state_hi)
        ok &= np.all((u >= model.control_lo) & (u <= model.control_hi), axis=1)
        idx = np.flatnonzero(ok)[: n_edges - have]
        keys.append(x0[idx, dw:])
        ctrls.append(u[idx])
        stps.append(st[idx])
        terms.append(xf[idx])
        have += idx.size
    return EdgeBundle(model.system_id, np.concatenate(keys), np.concatenate(ctrls),
                      np.concatenate(stps), np.concatenate(terms), seed, model.dt, t_max)


def instantiate(bundle: EdgeBundle, edge_id: int, at) -> tuple:
    """Control, duration and predicted endpoint of edge ``edge_id`` placed at state ``at``."""
    dw = bundle.model.workspace_dim
    predicted = bundle.terminals[edge_id].copy()
    predicted[:dw] += np.asarray(at, dtype=float)[:dw]
    return bundle.controls[edge_id].copy(), int(bundle.steps[edge_id]) * bundle.dt, predicted


# ---------------------------------------------------------------- retrieval


def key_distance(a, b, weights, angle_mask) -> np.ndarray:
    """Weighted Euclidean key distance with wrapped angle differences (broadcasts over rows)."""
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    d = np.where(angle_mask, np.minimum(d, 2 * math.pi - d), d)
    return np.sqrt(np.sum((d * weights) ** 2, axis=-1))


class KeyIndex:
    """Exact radius queries over bundle keys.

    Weighted keys are sorted by their first component; a query scans the
    slab ``|k0 - q0| <= delta`` (plus its copies shifted by one period when
    that component is an angle) and checks the full distance.
    """

    def __init__(self, bundle: EdgeBundle, weights=None):
        model = bundle.model
        self.weights = np.asarray(weights if weights is not None
                                  else DEFAULT_KEY_WEIGHTS[model.system_id], dtype=float)
        self.angle_mask = model.angle_mask[model.workspace_dim:]
        if np.any(self.angle_mask[1:]):
            raise ValueError("only the first key component may be an angle")
        self.size = len(bundle)
        self._keys = bundle.keys
        self._wkeys = np.ascontiguousarray(bundle.keys * self.weights)
        self._order = np.argsort(self._wkeys[:, 0], kind="stable").astype(np.int64)
        self._sorted = np.ascontiguousarray(self._wkeys[self._order])
        self._first = np.ascontiguousarray(self._sorted[:, 0])
        self._wrap = bool(self.angle_mask[0])
        self._period = 2 * math.pi * float(self.weights[0])

    def query(self, key, delta: float) -> np.ndarray:
        """Ascending ids of edges whose key lies within weighted distance ``delta``."""
        if delta < 0:
            raise ValueError("delta must be non-negative")
        if not math.isfinite(delta):
            return np.arange(self.size)
        q = np.asarray(key, dtype=float) * self.weights
        ids = K.band_query(self._sorted, self._first, self._order, q, float(delta), self._wrap, self._period)
        ids.sort()
        return ids

    def brute_force(self, key, delta: float) -> np.ndarray:
        d = key_distance(self._keys, np.asarray(key, dtype=float), self.weights, self.angle_mask)
        return np.flatnonzero(d <= delta)


def query_radius(index: KeyIndex, key, delta: float) -> set:
    return set(index.query(key, delta).tolist())


# -------------------------------------------------------------- persistence


def _record_dtype(model: SystemModel) -> np.dtype:
    return np.dtype([
        ("key", "<f8", (model.rem_dim,)),
        ("u", "<f8", (model.control_dim,)),
        ("steps", "<u4"),
        ("xf", "<f8", (model.state_dim,)),
    ])


def record_size(model: SystemModel) -> int:
    return _record_dtype(model).itemsize


HEADER_SIZE = _HEADER.size


def to_bytes(bundle: EdgeBundle) -> bytes:
    model = bundle.model
    header = _HEADER.pack(MAGIC, VERSION, model.code, bundle.dt, bundle.t_max, bundle.seed,
                          len(bundle), model.rem_dim, model.control_dim, model.state_dim)
    rec = np.empty(len(bundle), dtype=_record_dtype(model))
    rec["key"] = bundle.keys
    rec["u"] = bundle.controls
    rec["steps"] = bundle.steps
    rec["xf"] = bundle.terminals
    return header + rec.tobytes()


def save(bundle: EdgeBundle, path) -> None:
    Path(path).write_bytes(to_bytes(bundle))


def from_bytes(raw: bytes, expect_system=None) -> EdgeBundle:
    if len(raw) < HEADER_SIZE:
        raise BundleFormatError("file too short for a bundle header")
    magic, version, code, dt, t_max, seed, n, kd, cd, sd = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise BundleFormatError("bad magic bytes")
    if version != VERSION:
        raise BundleFormatError(f"unsupported bundle format version {version}")
    if code not in _SYSTEM_BY_CODE:
        raise BundleFormatError(f"unknown system code {code}")
    sid = _SYSTEM_BY_CODE[code]
    if expect_system is not None and SystemId(expect_system) != sid:
        raise BundleFormatError(f"system mismatch: bundle is {sid.value}, planner expects "
                                f"{SystemId(expect_system).value}")
    model = get_model(sid)
    if (kd, cd, sd) != (model.rem_dim, model.control_dim, model.state_dim):
        raise BundleFormatError("record dimensions do not match the system")
    dtype = _record_dtype(model)
    if len(raw) != HEADER_SIZE + n * dtype.itemsize:
        raise BundleFormatError("file size does not match the edge count")
    rec = np.frombuffer(raw, dtype=dtype, count=n, offset=HEADER_SIZE)
    return EdgeBundle(sid, rec["key"].copy(), rec["u"].copy(), rec["steps"].astype(np.int64),
                      rec["xf"].copy(), seed, dt, t_max)


def load(path, expect_system=None) -> EdgeBundle:
    return from_bytes(Path(path).read_bytes(), expect_system)


def verify_bundle(bundle: EdgeBundle, tol: float = 1e-9) -> np.ndarray:
    """Ids of edges that fail re-propagation, control bounds or state bounds.

    Every edge is re-integrated from its stored start; the stored terminal
    must match within ``tol`` (angles compared on the circle) and every
    sample must respect the state bounds.
    """
    model = bundle.model
    n = len(bundle)
    x0 = np.zeros((n, model.state_dim))
    x0[:, model.workspace_dim:] = bundle.keys
    ok, xf = K.batch_rollout_terminal(model.code, model.wheelbase, model.dt, x0,
                                      np.ascontiguousarray(bundle.controls),
                                      np.ascontiguousarray(bundle.steps, dtype=np.int64),
                                      model.state_lo, model.state_hi)
    ok &= np.all((bundle.controls >= model.control_lo) & (bundle.controls <= model.control_hi), axis=1)
    nmax = int(math.floor(bundle.t_max / bundle.dt + 1e-9))
    ok &= (bundle.steps >= 1) & (bundle.steps <= nmax)
    d = np.abs(xf - bundle.terminals)
    ang = model.angle_mask
    d[:, ang] = np.minimum(d[:, ang], 2 * math.pi - d[:, ang])
    ok &= np.all(d <= tol, axis=1)
    return np.flatnonzero(~ok)
