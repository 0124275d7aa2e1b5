"""Airspace geometry, STL channels and specifications, episode sampling.

Coordinates are meters with x east, y north, z above field elevation. The
default field has a 1.5 km runway on the x-axis from (0, 0) to (1500, 0);
"R08" is the west end (landing eastbound) and "R26" the east end (landing
westbound). Headings are math-convention radians (0 = +x, counterclockwise).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dynamics import AircraftState, wrap_angle
from .stl import Formula, Trace, robustness_prefix
from .stl.ast import Always, And, Eventually, Predicate

DEFAULT_GOALS = ("N", "NE", "E", "SE", "S", "SW", "W", "NW", "R08", "R26")


@dataclass(frozen=True)
class Region:
    name: str
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != 3 or len(hi) != 3 or not all(a < b for a, b in zip(lo, hi)):
            raise ValueError(f"region {self.name!r}: need min < max on every axis, got {lo} / {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def center(self) -> tuple[float, float, float]:
        return tuple((a + b) / 2 for a, b in zip(self.lo, self.hi))

    def contains(self, p: Sequence[float]) -> bool:
        return all(a <= v <= b for a, v, b in zip(self.lo, p[:3], self.hi))

    def inside_of(self, other: "Region") -> bool:
        return all(a >= c for a, c in zip(self.lo, other.lo)) and all(b <= d for b, d in zip(self.hi, other.hi))

    def overlaps(self, other: "Region") -> bool:
        return all(a < d and c < b for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))

    def to_json(self) -> dict:
        return {"name": self.name, "box": [[a, b] for a, b in zip(self.lo, self.hi)]}

    @classmethod
    def from_json(cls, d: dict) -> "Region":
        box = d["box"]
        return cls(d["name"], tuple(b[0] for b in box), tuple(b[1] for b in box))


def signed_distance(r: Region, s: Sequence[float]) -> float:
    """Depth inside the box (distance to the nearest face), or minus the distance to it."""
    gaps = []
    depth = math.inf
    for a, v, b in zip(r.lo, s[:3], r.hi):
        if v < a:
            gaps.append(a - v)
        elif v > b:
            gaps.append(v - b)
        else:
            depth = min(depth, v - a, b - v)
    if gaps:
        # same rescaled form as ``signed_distances`` so both agree bit for bit
        scale = max(gaps)
        total = 0.0
        for g in gaps:
            total += (g / scale) * (g / scale)
        return -(scale * math.sqrt(total))
    return depth


def signed_distances(lo: np.ndarray, hi: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Vectorized signed distance of points ``p`` (..., 3) to boxes (R, 3); returns (..., R)."""
    p = np.asarray(p, dtype=float)[..., None, :]
    below = lo - p
    above = p - hi
    gap = np.maximum(np.maximum(below, above), 0.0)
    # rescale before squaring so gaps near the float minimum do not vanish
    scale = np.max(gap, axis=-1, keepdims=True)
    safe = np.where(scale > 0.0, scale, 1.0)
    unit = gap / safe
    outside = scale[..., 0] * np.sqrt(np.sum(unit * unit, axis=-1))
    depth = np.min(np.minimum(-below, -above), axis=-1)
    return np.where(scale[..., 0] > 0.0, -outside, depth)


@dataclass(frozen=True)
class Runway:
    name: str
    heading: float  # landing direction, radians
    final: str
    base: str
    downwind: str
    pattern: str = "left"


@dataclass
class Episode:
    start_region: str
    goal_region: str
    start_state: AircraftState
    spec: Formula
    spec_kind: str  # "landing" | "takeoff"


@dataclass(eq=False)
class Airspace:
    bounding_box: Region
    regions: dict[str, Region]
    runways: dict[str, Runway]
    goal_set: tuple[str, ...] = DEFAULT_GOALS
    pattern_altitude_m: float = 304.8
    landing_ceiling_m: float = 30.0
    altitude_band_m: float = 30.0
    takeoff_altitude_m: tuple[float, float] = (0.0, 15.0)
    step_seconds: float = 20.0
    _names: tuple[str, ...] = field(init=False, repr=False)
    _lo: np.ndarray = field(init=False, repr=False)
    _hi: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.goal_set = tuple(self.goal_set)
        for g in self.goal_set:
            if g not in self.regions:
                raise ValueError(f"goal {g!r} has no region")
        for i, a in enumerate(self.goal_set):
            for b in self.goal_set[i + 1 :]:
                if self.regions[a].overlaps(self.regions[b]):
                    raise ValueError(f"goal regions {a!r} and {b!r} overlap")
        for r in self.regions.values():
            if not r.inside_of(self.bounding_box):
                raise ValueError(f"region {r.name!r} leaves the bounding box")
        for rw in self.runways.values():
            if rw.name not in self.regions:
                raise ValueError(f"runway {rw.name!r} has no goal region")
            for leg in (rw.final, rw.base, rw.downwind):
                if leg not in self.regions:
                    raise ValueError(f"runway {rw.name!r}: missing pattern region {leg!r}")
        self._names = tuple(self.regions)
        self._lo = np.array([self.regions[n].lo for n in self._names])
        self._hi = np.array([self.regions[n].hi for n in self._names])

    # geometry -----------------------------------------------------------
    @property
    def half_diagonal(self) -> float:
        b = self.bounding_box
        return 0.5 * math.dist(b.lo, b.hi)

    def is_runway(self, name: str) -> bool:
        return name in self.runways

    def reached(self, name: str, s: Sequence[float]) -> bool:
        """Whether ``s`` counts as arriving at goal-set region ``name``."""
        if not self.regions[name].contains(s):
            return False
        return not self.is_runway(name) or s[2] < self.landing_ceiling_m

    def goal_region_of(self, s: Sequence[float]) -> str | None:
        for g in self.goal_set:
            if self.reached(g, s):
                return g
        return None

    def channel_names(self, names: Iterable[str] | None = None) -> list[str]:
        return [f"d_{n}" for n in (self._names if names is None else names)]

    def distances(self, points: np.ndarray, names: Sequence[str] | None = None) -> np.ndarray:
        """Signed distances (..., R) for the named regions (all regions by default)."""
        if names is None:
            return signed_distances(self._lo, self._hi, points)
        idx = [self._names.index(n) for n in names]
        return signed_distances(self._lo[idx], self._hi[idx], points)

    # serialization -----------------------------------------------------
    def to_json(self) -> dict:
        return {
            "bounding_box": self.bounding_box.to_json()["box"],
            "regions": [r.to_json() for r in self.regions.values()],
            "runways": [
                {
                    "name": rw.name,
                    "heading_deg": math.degrees(rw.heading),
                    "final": rw.final,
                    "base": rw.base,
                    "downwind": rw.downwind,
                    "pattern": rw.pattern,
                }
                for rw in self.runways.values()
            ],
            "goal_set": list(self.goal_set),
            "pattern_altitude_m": self.pattern_altitude_m,
            "landing_ceiling_m": self.landing_ceiling_m,
            "altitude_band_m": self.altitude_band_m,
            "takeoff_altitude_m": list(self.takeoff_altitude_m),
            "step_seconds": self.step_seconds,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Airspace":
        box = d["bounding_box"]
        regions = [Region.from_json(r) for r in d["regions"]]
        runways = [
            Runway(
                r["name"],
                math.radians(r["heading_deg"]),
                r["final"],
                r["base"],
                r["downwind"],
                r.get("pattern", "left"),
            )
            for r in d.get("runways", [])
        ]
        return cls(
            Region("bounds", tuple(b[0] for b in box), tuple(b[1] for b in box)),
            {r.name: r for r in regions},
            {r.name: r for r in runways},
            tuple(d.get("goal_set", DEFAULT_GOALS)),
            d.get("pattern_altitude_m", 304.8),
            d.get("landing_ceiling_m", 30.0),
            d.get("altitude_band_m", 30.0),
            tuple(d.get("takeoff_altitude_m", (0.0, 15.0))),
            d.get("step_seconds", 20.0),
        )


def load_airspace(path) -> Airspace:
    return Airspace.from_json(json.loads(Path(path).read_text()))


def _pattern_regions(rw_name: str, threshold_x: float, sign: float, side: float) -> list[Region]:
    """Downwind/base/final boxes for a runway landing in direction ``sign`` (+1 east, -1 west).

    ``side`` is +1 when the pattern lies north of the runway, -1 south.
    """

    def box(name, x0, x1, y0, y1, z0, z1):
        xs = sorted((threshold_x + sign * x0, threshold_x + sign * x1))
        ys = sorted((side * y0, side * y1))
        return Region(name, (xs[0], ys[0], z0), (xs[1], ys[1], z1))

    # distances measured along the landing direction from the threshold
    return [
        box(f"downwind_{rw_name}", -1200.0, 2800.0, 450.0, 3000.0, 150.0, 500.0),
        box(f"base_{rw_name}", -4200.0, -1200.0, 450.0, 3000.0, 60.0, 500.0),
        box(f"final_{rw_name}", -4200.0, 600.0, -450.0, 450.0, -100.0, 400.0),
    ]


def default_airspace() -> Airspace:
    field_center = (750.0, 0.0)
    radius, half = 6000.0, 1000.0
    regions: dict[str, Region] = {}
    for i, name in enumerate(("E", "NE", "N", "NW", "W", "SW", "S", "SE")):
        ang = math.radians(45.0 * i)
        cx = field_center[0] + radius * math.cos(ang)
        cy = field_center[1] + radius * math.sin(ang)
        regions[name] = Region(name, (cx - half, cy - half, 0.0), (cx + half, cy + half, 1500.0))
    regions["R08"] = Region("R08", (-600.0, -250.0, -100.0), (500.0, 250.0, 100.0))
    regions["R26"] = Region("R26", (1000.0, -250.0, -100.0), (2100.0, 250.0, 100.0))
    # left-hand traffic: R08 pattern north of the field, R26 south
    for r in _pattern_regions("R08", 0.0, +1.0, +1.0) + _pattern_regions("R26", 1500.0, -1.0, -1.0):
        regions[r.name] = r
    runways = {
        "R08": Runway("R08", 0.0, "final_R08", "base_R08", "downwind_R08"),
        "R26": Runway("R26", math.pi, "final_R26", "base_R26", "downwind_R26"),
    }
    bounds = Region("bounds", (-8500.0, -8500.0, -200.0), (10000.0, 8500.0, 1600.0))
    return Airspace(bounds, dict(sorted(regions.items())), runways)


# STL channels and specifications ------------------------------------------


def stage_predicates(airspace: Airspace, runway: str) -> tuple[Predicate, Predicate, Predicate]:
    if runway not in airspace.runways:
        raise KeyError(f"unknown runway {runway!r}")
    rw = airspace.runways[runway]
    return tuple(Predicate(f"d_{leg}", ">", 0.0) for leg in (rw.downwind, rw.base, rw.final))


def build_landing_spec(airspace: Airspace, runway: str) -> Formula:
    """Downwind, then base, then final for the rest of the trace."""
    down, base, final = stage_predicates(airspace, runway)
    return Eventually(And(down, Eventually(And(base, Eventually(Always(final))))))


def landing_stage_specs(airspace: Airspace, runway: str) -> tuple[Formula, Formula, Formula]:
    """The three nested eventually-prefixes of the landing spec, shortest first."""
    down, base, _ = stage_predicates(airspace, runway)
    return (
        Eventually(down),
        Eventually(And(down, Eventually(base))),
        build_landing_spec(airspace, runway),
    )


def build_takeoff_spec(airspace: Airspace, goal: str) -> Formula:
    if goal not in airspace.regions:
        raise KeyError(f"unknown region {goal!r}")
    return Eventually(Predicate(f"d_{goal}", ">", 0.0))


def build_spec(airspace: Airspace, goal: str) -> tuple[Formula, str]:
    if airspace.is_runway(goal):
        return build_landing_spec(airspace, goal), "landing"
    return build_takeoff_spec(airspace, goal), "takeoff"


def spec_regions(airspace: Airspace, goal: str) -> list[str]:
    """Regions whose channels the planner needs for an episode to ``goal``."""
    if airspace.is_runway(goal):
        rw = airspace.runways[goal]
        return [rw.downwind, rw.base, rw.final, goal]
    return [goal]


def derive_channels(
    airspace: Airspace,
    states: Sequence[Sequence[float]],
    goal: str,
    names: Sequence[str] | None = None,
) -> Trace:
    """STL trace for a primitive-granularity state sequence.

    One ``d_<region>`` channel per requested region (every region when
    ``names`` is None) plus ``in_goal``, the signed distance to ``goal``.
    """
    names = list(airspace.regions) if names is None else list(names)
    pts = np.array([s[:3] for s in states], dtype=float).reshape(-1, 3)
    d = airspace.distances(pts, names)
    chans = {f"d_{n}": d[:, i] for i, n in enumerate(names)}
    chans["in_goal"] = airspace.distances(pts, [goal])[:, 0]
    ts = np.arange(len(pts)) * airspace.step_seconds
    return Trace(ts, chans)


# episodes ----------------------------------------------------------------


def sample_start_state(airspace: Airspace, region: str, rng: np.random.Generator) -> AircraftState:
    r = airspace.regions[region]
    x = rng.uniform(r.lo[0], r.hi[0])
    y = rng.uniform(r.lo[1], r.hi[1])
    if airspace.is_runway(region):
        lo, hi = airspace.takeoff_altitude_m
        z = rng.uniform(lo, hi)
        chi = airspace.runways[region].heading
    else:
        band = airspace.altitude_band_m
        z = rng.uniform(airspace.pattern_altitude_m - band, airspace.pattern_altitude_m + band)
        rx, ry, _ = _field_center(airspace)
        chi = math.atan2(ry - y, rx - x)
    return AircraftState(float(x), float(y), float(z), wrap_angle(chi))


def _field_center(airspace: Airspace) -> tuple[float, float, float]:
    pts = [airspace.regions[n].center for n in airspace.runways]
    if not pts:
        return airspace.bounding_box.center
    return tuple(float(np.mean([p[i] for p in pts])) for i in range(3))


def sample_episode(
    airspace: Airspace,
    rng: np.random.Generator,
    start: str | None = None,
    goal: str | None = None,
) -> Episode:
    goals = airspace.goal_set
    if len(goals) < 2:
        raise ValueError("need at least two goal-set regions")
    for name in (start, goal):
        if name is not None and name not in goals:
            raise ValueError(f"{name!r} is not in the goal set {list(goals)}")
    if start is not None and start == goal:
        raise ValueError(f"start and goal are both {start!r}")
    if start is None and goal is None:
        k = int(rng.integers(len(goals) * (len(goals) - 1)))
        i, j = divmod(k, len(goals) - 1)
        start = goals[i]
        goal = [g for g in goals if g != start][j]
    elif start is None:
        others = [g for g in goals if g != goal]
        start = others[int(rng.integers(len(others)))]
    elif goal is None:
        others = [g for g in goals if g != start]
        goal = others[int(rng.integers(len(others)))]
    spec, kind = build_spec(airspace, goal)
    return Episode(start, goal, sample_start_state(airspace, start, rng), spec, kind)


def episode_stl_score(
    trace: Trace, spec: Formula, spec_kind: str, airspace: Airspace, goal: str
) -> tuple[float, float]:
    """(stage-fraction score, raw robustness of ``spec``) for an executed trace.

    Landing: fraction of the three pattern stages achieved in order, where
    stage i counts when the i-th nested eventually-prefix has robustness >= 0.
    Takeoff: 1 when the takeoff spec holds, else 0.
    """
    rho = robustness_prefix(spec, trace)
    if spec_kind == "landing":
        achieved = 0
        for stage in landing_stage_specs(airspace, goal):
            if robustness_prefix(stage, trace) < 0:
                break
            achieved += 1
        return achieved / 3.0, rho
    return (1.0 if robustness_prefix(build_takeoff_spec(airspace, goal), trace) >= 0 else 0.0), rho
