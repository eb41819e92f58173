"""Kinodynamic system models and fixed-step RK4 propagation.

States and controls are plain float64 arrays. The first ``workspace_dim``
entries of a state are its workspace position; the rest ("remainder") are
translation invariant and double as the edge-bundle key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernels as K


class SystemId(str, Enum):
    UC = "UC"
    SOC = "SOC"
    DI = "DI"


_CODES = {SystemId.UC: K.UC, SystemId.SOC: K.SOC, SystemId.DI: K.DI}


@dataclass(frozen=True)
class SystemModel:
    system_id: SystemId
    workspace_dim: int
    state_dim: int
    control_dim: int
    control_lo: np.ndarray
    control_hi: np.ndarray
    # -inf/+inf marks an unbounded component (positions, headings)
    state_lo: np.ndarray
    state_hi: np.ndarray
    angle_mask: np.ndarray
    footprint: tuple
    dt: float = 0.1
    wheelbase: float = 0.0
    state_names: tuple = field(default=())

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if np.any(self.control_lo > self.control_hi) or np.any(self.state_lo > self.state_hi):
            raise ValueError("empty bound interval")

    @property
    def code(self) -> int:
        return _CODES[self.system_id]

    @property
    def rem_dim(self) -> int:
        return self.state_dim - self.workspace_dim

    def steps(self, duration: float) -> int:
        """Number of dt steps in ``duration``; raises unless it is a positive multiple of dt."""
        n = round(duration / self.dt)
        if n < 1 or abs(n * self.dt - duration) > 1e-9:
            raise ValueError(f"duration {duration} is not a positive multiple of dt={self.dt}")
        return n

    def sample_rem(self, rng: np.random.Generator, size=None) -> np.ndarray:
        """Remainder components uniform over their bounds; headings uniform on (-pi, pi]."""
        lo = self.state_lo[self.workspace_dim:].copy()
        hi = self.state_hi[self.workspace_dim:].copy()
        ang = self.angle_mask[self.workspace_dim:]
        lo[ang] = -math.pi
        hi[ang] = math.pi
        shape = (self.rem_dim,) if size is None else (size, self.rem_dim)
        rem = rng.uniform(lo, hi, size=shape)
        rem[..., ang] = np.where(rem[..., ang] <= -math.pi, math.pi, rem[..., ang])
        return rem


def _model(sid, dw, lo_u, hi_u, lo_s, hi_s, angles, footprint, wheelbase=0.0, names=()):
    return SystemModel(
        system_id=sid,
        workspace_dim=dw,
        state_dim=len(lo_s),
        control_dim=len(lo_u),
        control_lo=np.array(lo_u, dtype=float),
        control_hi=np.array(hi_u, dtype=float),
        state_lo=np.array(lo_s, dtype=float),
        state_hi=np.array(hi_s, dtype=float),
        angle_mask=np.array(angles, dtype=bool),
        footprint=footprint,
        wheelbase=wheelbase,
        state_names=names,
    )


_INF = math.inf

UNICYCLE = _model(
    SystemId.UC, 2,
    [-0.5, -0.5], [0.5, 0.5],
    [-_INF, -_INF, -_INF], [_INF, _INF, _INF],
    [False, False, True],
    ("circle", 0.4),
    names=("x", "y", "theta"),
)

SECOND_ORDER_CAR = _model(
    SystemId.SOC, 2,
    [-2.0, -0.5], [2.0, 0.5],
    [-_INF, -_INF, -_INF, -1.0, -math.pi / 3], [_INF, _INF, _INF, 1.0, math.pi / 3],
    [False, False, True, False, False],
    ("rect", 0.7, 0.4),
    wheelbase=0.7,
    names=("x", "y", "theta", "v", "phi"),
)

DOUBLE_INTEGRATOR = _model(
    SystemId.DI, 3,
    [-2.0, -2.0, -2.0], [2.0, 2.0, 2.0],
    [-_INF, -_INF, -_INF, -0.5, -0.5, -0.5], [_INF, _INF, _INF, 0.5, 0.5, 0.5],
    [False] * 6,
    ("sphere", 0.1),
    names=("px", "py", "pz", "vx", "vy", "vz"),
)

MODELS = {
    SystemId.UC: UNICYCLE,
    SystemId.SOC: SECOND_ORDER_CAR,
    SystemId.DI: DOUBLE_INTEGRATOR,
}


def get_model(system) -> SystemModel:
    return MODELS[SystemId(system)]


@dataclass
class TrajectorySegment:
    """States sampled every dt under one constant control.

    ``start_step`` is the absolute offset (in dt steps) of ``states[0]``
    within the parent trajectory.
    """

    control: np.ndarray
    nsteps: int
    states: np.ndarray
    start_step: int = 0
    dt: float = 0.1

    @property
    def duration(self) -> float:
        return self.nsteps * self.dt

    @property
    def start_time(self) -> float:
        return self.start_step * self.dt

    @property
    def end_step(self) -> int:
        return self.start_step + self.nsteps

    @property
    def terminal(self) -> np.ndarray:
        return self.states[-1]

    def truncated(self, nsteps: int) -> "TrajectorySegment":
        return TrajectorySegment(self.control, nsteps, self.states[: nsteps + 1].copy(),
                                 self.start_step, self.dt)


def _check_dims(model: SystemModel, x, u=None):
    if np.shape(x) != (model.state_dim,):
        raise ValueError(f"state must have shape ({model.state_dim},), got {np.shape(x)}")
    if u is not None and np.shape(u) != (model.control_dim,):
        raise ValueError(f"control must have shape ({model.control_dim},), got {np.shape(u)}")


def derivative(model: SystemModel, x, u) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    _check_dims(model, x, u)
    out = np.empty(model.state_dim)
    K.derivative(model.code, model.wheelbase, x, u, out)
    return out


def propagate_steps(model: SystemModel, x0, u, nsteps: int, start_step: int = 0) -> TrajectorySegment:
    x0 = np.ascontiguousarray(x0, dtype=float)
    u = np.ascontiguousarray(u, dtype=float)
    states = K.rollout(model.code, model.wheelbase, model.dt, x0, u, int(nsteps))
    return TrajectorySegment(u, int(nsteps), states, start_step, model.dt)


def propagate(model: SystemModel, x0, u, duration: float, start_time: float = 0.0) -> TrajectorySegment:
    """Classic RK4 at fixed dt under zero-order-hold control ``u`` for ``duration`` seconds."""
    x0 = np.asarray(x0, dtype=float)
    u = np.asarray(u, dtype=float)
    _check_dims(model, x0, u)
    n = model.steps(duration)
    return propagate_steps(model, x0, u, n, round(start_time / model.dt))


def translate(x, beta) -> np.ndarray:
    """Shift the position components of ``x`` by ``beta``; the remainder is untouched."""
    x = np.array(x, dtype=float)
    beta = np.asarray(beta, dtype=float)
    x[..., : beta.shape[-1]] += beta
    return x


def key(model: SystemModel, x) -> np.ndarray:
    return np.asarray(x, dtype=float)[..., model.workspace_dim:].copy()


def within_control_bounds(model: SystemModel, u) -> bool:
    u = np.asarray(u)
    return bool(np.all(u >= model.control_lo) and np.all(u <= model.control_hi))


def is_dyn_feasible(model: SystemModel, seg: TrajectorySegment) -> bool:
    """Control and bounded remainder components within limits at every stored sample."""
    if not within_control_bounds(model, seg.control):
        return False
    s = seg.states
    return bool(np.all(s >= model.state_lo) and np.all(s <= model.state_hi))


def normalize_angles(model: SystemModel, x) -> np.ndarray:
    x = np.array(x, dtype=float)
    for i in np.flatnonzero(model.angle_mask):
        x[..., i] = np.vectorize(K.wrap_angle)(x[..., i])
    return x


def sample_control(model: SystemModel, rng: np.random.Generator, size=None) -> np.ndarray:
    shape = (model.control_dim,) if size is None else (size, model.control_dim)
    return rng.uniform(model.control_lo, model.control_hi, size=shape)


def sample_steps(model: SystemModel, t_max: float, rng: np.random.Generator, size=None):
    nmax = int(math.floor(t_max / model.dt + 1e-9))
    return rng.integers(1, nmax + 1, size=size)


def sample_duration(model: SystemModel, t_max: float, rng: np.random.Generator) -> float:
    return model.dt * int(sample_steps(model, t_max, rng))


def sample_start_at_origin(model: SystemModel, rng: np.random.Generator, size=None) -> np.ndarray:
    rem = model.sample_rem(rng, size)
    pos = np.zeros(rem.shape[:-1] + (model.workspace_dim,))
    return np.concatenate([pos, rem], axis=-1)
