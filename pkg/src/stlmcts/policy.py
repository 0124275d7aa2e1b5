"""Action priors and state values for the planner.

A learned imitation policy would plug in behind ``PolicyPrior``. The
implementations here are derived from a visit-frequency costmap, a uniform
baseline, and a file-backed replay table for deterministic tests.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import numpy as np

from .dynamics import AircraftState, PrimitiveLibrary, integrate
from .scenario import DEFAULT_GOALS


@dataclass(frozen=True)
class GoalVector:
    names: tuple[str, ...]
    index: int

    def __post_init__(self):
        if not 0 <= self.index < len(self.names):
            raise ValueError(f"goal index {self.index} outside goal set of size {len(self.names)}")

    @classmethod
    def of(cls, name: str, names: Sequence[str] = DEFAULT_GOALS) -> "GoalVector":
        names = tuple(names)
        if name not in names:
            raise ValueError(f"{name!r} is not in the goal set {list(names)}")
        return cls(names, names.index(name))

    @property
    def name(self) -> str:
        return self.names[self.index]

    @property
    def vector(self) -> np.ndarray:
        v = np.zeros(len(self.names))
        v[self.index] = 1.0
        return v


class PolicyPrior(Protocol):
    """Probability vector over the primitive library.

    ``history`` runs from the episode start to the state being expanded
    (last element); a learned policy may use an observation window of it.
    """

    def __call__(self, history: Sequence[AircraftState], goal: GoalVector) -> np.ndarray: ...


# costmap --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Costmap:
    origin: tuple[float, float, float]
    resolution: tuple[float, float, float]
    dims: tuple[int, int, int]
    values: np.ndarray  # flat, x fastest: index = ix + nx * (iy + ny * iz)

    def __post_init__(self):
        origin = tuple(float(v) for v in self.origin)
        res = tuple(float(v) for v in self.resolution)
        dims = tuple(int(v) for v in self.dims)
        _check_grid(origin, res, dims)
        vals = np.array(self.values, dtype=float).reshape(-1)
        if vals.size != dims[0] * dims[1] * dims[2]:
            raise ValueError(f"costmap has {vals.size} values for dims {dims}")
        if np.any(~np.isfinite(vals)) or np.any(vals < 0.0) or np.any(vals > 1.0):
            raise ValueError("costmap values must lie in [0, 1]")
        vals.setflags(write=False)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "resolution", res)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "_grid_arrays", (np.array(origin), np.array(res), np.array(dims, dtype=np.int64)))

    def __eq__(self, other):
        if not isinstance(other, Costmap):
            return NotImplemented
        return (
            self.origin == other.origin
            and self.resolution == other.resolution
            and self.dims == other.dims
            and np.array_equal(self.values, other.values)
        )

    def grid(self) -> np.ndarray:
        """Values as an (nz, ny, nx) array."""
        nx, ny, nz = self.dims
        return self.values.reshape(nz, ny, nx)

    def lookup_many(self, points: np.ndarray) -> np.ndarray:
        """Vectorized ``costmap_lookup`` over the last axis of ``points``."""
        o, r, d = self._grid_arrays
        idx = np.floor((np.asarray(points, dtype=float) - o) / r).astype(np.int64)
        ok = ((idx >= 0) & (idx < d)).all(axis=-1)
        flat = idx[..., 0] + d[0] * (idx[..., 1] + d[1] * idx[..., 2])
        flat[~ok] = 0
        return self.values[flat] * ok

    def to_json(self) -> dict:
        return {
            "origin": list(self.origin),
            "resolution": list(self.resolution),
            "dims": list(self.dims),
            "values": self.values.tolist(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "Costmap":
        return cls(tuple(d["origin"]), tuple(d["resolution"]), tuple(d["dims"]), np.asarray(d["values"], float))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "Costmap":
        return cls.from_json(json.loads(Path(path).read_text()))


def _check_grid(origin, resolution, dims) -> None:
    if len(origin) != 3 or len(resolution) != 3 or len(dims) != 3:
        raise ValueError("grid spec needs 3-D origin, resolution and dims")
    if not all(math.isfinite(v) for v in origin):
        raise ValueError("grid origin must be finite")
    if not all(r > 0 and math.isfinite(r) for r in resolution):
        raise ValueError(f"grid resolution must be positive, got {resolution}")
    if not all(int(d) >= 1 for d in dims):
        raise ValueError(f"grid dims must be >= 1, got {dims}")


def costmap_lookup(c: Costmap, s: Sequence[float]) -> float:
    """Value of the cell holding ``s`` (floor convention); 0 outside the grid."""
    ix = math.floor((s[0] - c.origin[0]) / c.resolution[0])
    iy = math.floor((s[1] - c.origin[1]) / c.resolution[1])
    iz = math.floor((s[2] - c.origin[2]) / c.resolution[2])
    nx, ny, nz = c.dims
    if 0 <= ix < nx and 0 <= iy < ny and 0 <= iz < nz:
        return float(c.values[ix + nx * (iy + ny * iz)])
    return 0.0


def build_costmap_from_traces(traces, origin, resolution, dims, smooth_cells: float = 0.0) -> Costmap:
    """Per-cell sample counts over all traces, divided by the largest count.

    ``traces`` holds objects with ``x``, ``y``, ``z`` channels (``stl.Trace``)
    or plain (n, >=3) position arrays. ``smooth_cells`` > 0 applies a
    Gaussian blur of that many cells (std) to the counts before normalizing.
    """
    traces = list(traces)
    if not traces:
        raise ValueError("no traces to count")
    _check_grid(origin, resolution, dims)
    nx, ny, nz = (int(d) for d in dims)
    counts = np.zeros(nx * ny * nz)
    for tr in traces:
        if hasattr(tr, "channels"):
            pts = np.column_stack([tr.channels["x"], tr.channels["y"], tr.channels["z"]])
        else:
            pts = np.asarray(tr, dtype=float)[:, :3]
        idx = np.floor((pts - np.asarray(origin, float)) / np.asarray(resolution, float))
        ok = np.all((idx >= 0) & (idx < (nx, ny, nz)), axis=1)
        idx = idx[ok].astype(np.int64)
        np.add.at(counts, idx[:, 0] + nx * (idx[:, 1] + ny * idx[:, 2]), 1.0)
    if smooth_cells > 0:
        from scipy.ndimage import gaussian_filter

        counts = gaussian_filter(counts.reshape(nz, ny, nx), smooth_cells, mode="constant").reshape(-1)
    peak = counts.max()
    if peak > 0:
        counts /= peak
    return Costmap(tuple(origin), tuple(resolution), (nx, ny, nz), counts)


def grid_for(bounds_lo, bounds_hi, resolution) -> tuple[tuple, tuple, tuple]:
    """Grid spec covering a bounding box at the given resolution."""
    dims = tuple(max(1, math.ceil((h - l) / r)) for l, h, r in zip(bounds_lo, bounds_hi, resolution))
    return tuple(float(v) for v in bounds_lo), tuple(float(r) for r in resolution), dims


class CostmapSet:
    """One costmap per goal, with an optional shared fallback."""

    def __init__(self, maps: Costmap | Mapping[str, Costmap]):
        if isinstance(maps, Costmap):
            self.shared, self.per_goal = maps, {}
        else:
            self.per_goal = dict(maps)
            self.shared = self.per_goal.pop("*", None)
            if not self.per_goal and self.shared is None:
                raise ValueError("empty costmap set")

    def for_goal(self, goal: str) -> Costmap:
        c = self.per_goal.get(goal, self.shared)
        if c is None:
            raise KeyError(f"no costmap for goal {goal!r}")
        return c

    def value(self, s: Sequence[float], goal: str) -> float:
        return costmap_lookup(self.for_goal(goal), s)


# priors ---------------------------------------------------------------------


def softmax(scores: np.ndarray, temperature: float) -> np.ndarray:
    z = (np.asarray(scores, float) - np.max(scores)) / temperature
    w = np.exp(z)
    return w / w.sum()


@dataclass
class UniformPrior:
    size: int

    def __call__(self, history, goal) -> np.ndarray:
        return np.full(self.size, 1.0 / self.size)


def uniform_prior(lib: PrimitiveLibrary) -> UniformPrior:
    return UniformPrior(len(lib))


@dataclass
class CostmapPrior:
    costmaps: CostmapSet
    lib: PrimitiveLibrary
    temperature: float = 0.1

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if not isinstance(self.costmaps, CostmapSet):
            self.costmaps = CostmapSet(self.costmaps)

    def scores(self, s: AircraftState, goal: str) -> np.ndarray:
        """Mean costmap value along each primitive's samples from ``s``."""
        pts = self.lib.sample_positions(s)
        return self.costmaps.for_goal(goal).lookup_many(pts).mean(axis=1)

    def __call__(self, history, goal: GoalVector) -> np.ndarray:
        scores = self.scores(history[-1], goal.name)
        if not np.any(scores):
            return np.full(len(self.lib), 1.0 / len(self.lib))
        return softmax(scores, self.temperature)


def costmap_prior(c, lib: PrimitiveLibrary, temperature: float = 0.1) -> CostmapPrior:
    return CostmapPrior(CostmapSet(c) if not isinstance(c, CostmapSet) else c, lib, temperature)


@dataclass
class ReplayPrior:
    """Probability vectors looked up by quantized (goal, position) key.

    Keys are ``"<goal>|<ix>,<iy>,<iz>"`` with ``i = floor(coord / quantum)``;
    unknown keys fall back to uniform.
    """

    table: dict[str, np.ndarray]
    size: int
    quantum: float = 500.0

    def __post_init__(self):
        clean = {}
        for k, p in self.table.items():
            p = np.asarray(p, dtype=float)
            if p.shape != (self.size,) or np.any(p < 0) or not math.isclose(p.sum(), 1.0, abs_tol=1e-9):
                raise ValueError(f"replay entry {k!r} is not a distribution over {self.size} actions")
            clean[k] = p
        self.table = clean

    def key(self, s: Sequence[float], goal: str) -> str:
        q = self.quantum
        return f"{goal}|{math.floor(s[0] / q)},{math.floor(s[1] / q)},{math.floor(s[2] / q)}"

    def __call__(self, history, goal: GoalVector) -> np.ndarray:
        p = self.table.get(self.key(history[-1], goal.name))
        if p is None:
            return np.full(self.size, 1.0 / self.size)
        return p.copy()

    def to_json(self) -> dict:
        return {"quantum": self.quantum, "size": self.size, "table": {k: v.tolist() for k, v in self.table.items()}}

    @classmethod
    def load(cls, path) -> "ReplayPrior":
        d = json.loads(Path(path).read_text())
        if "table" not in d:  # bare key -> probabilities map
            size = len(next(iter(d.values())))
            return cls(d, size)
        return cls(d["table"], int(d["size"]), float(d.get("quantum", 500.0)))


# action matching -----------------------------------------------------------


def match_primitive(
    target: np.ndarray,
    lib: PrimitiveLibrary,
    start: AircraftState,
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> int:
    """Library primitive whose samples best fit ``target`` (weighted squared error)."""
    target = np.asarray(target, dtype=float)
    if target.ndim != 2 or target.shape[0] != lib.n_samples or target.shape[1] < 3:
        raise ValueError(f"target must be ({lib.n_samples}, 3+) points, got shape {target.shape}")
    w = np.asarray(weights, dtype=float)
    best, best_cost = -1, math.inf
    for prim in lib.primitives:
        seg = integrate(start, prim, lib.horizon, lib.sample_period).as_array()[:, :3]
        cost = float(np.sum(w * (seg - target[:, :3]) ** 2))
        if cost < best_cost:
            best, best_cost = prim.id, cost
    return best
