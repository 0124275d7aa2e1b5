"""Fixed-wing kinematics and the motion-primitive action library.

The model is the usual coordinated-turn kinematics with constant inputs::

    x' = v2d cos(chi),  y' = v2d sin(chi),  z' = vh,  chi' = g tan(phi) / v2d
    v**2 = v2d**2 + vh**2

With piecewise-constant inputs the flight path is a helix, so segments are
integrated in closed form rather than stepped numerically.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

G_E = 9.80665
KNOT = 0.514444  # m/s
FOOT = 0.3048  # m
FPM = FOOT / 60.0  # ft/min -> m/s


def wrap_angle(a: float) -> float:
    """Wrap to [-pi, pi)."""
    w = (a + math.pi) % (2.0 * math.pi) - math.pi
    return -math.pi if w >= math.pi else w


class AircraftState(NamedTuple):
    x: float
    y: float
    z: float
    chi: float

    @classmethod
    def make(cls, x, y, z, chi) -> "AircraftState":
        vals = (float(x), float(y), float(z), float(chi))
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite aircraft state {vals}")
        return cls(vals[0], vals[1], vals[2], wrap_angle(vals[3]))


@dataclass(frozen=True)
class MotionPrimitive:
    id: int
    v: float
    v_h: float
    phi: float

    def __post_init__(self):
        if not (self.v > abs(self.v_h)):
            raise ValueError(f"primitive {self.id}: need v > |v_h| (v={self.v}, v_h={self.v_h})")
        if not abs(self.phi) < math.pi / 2:
            raise ValueError(f"primitive {self.id}: bank angle {self.phi} outside (-pi/2, pi/2)")

    @property
    def v2d(self) -> float:
        return math.sqrt(self.v * self.v - self.v_h * self.v_h)

    @property
    def turn_rate(self) -> float:
        return G_E * math.tan(self.phi) / self.v2d

    @classmethod
    def from_heading_change(cls, id: int, v: float, v_h: float, dchi: float, horizon: float) -> "MotionPrimitive":
        """Primitive whose constant bank turns the heading by ``dchi`` over ``horizon`` seconds."""
        v2d = math.sqrt(v * v - v_h * v_h)
        return cls(id, v, v_h, math.atan((dchi / horizon) * v2d / G_E))


@dataclass(frozen=True)
class Segment:
    states: list[AircraftState]
    sample_period: float

    def __len__(self):
        return len(self.states)

    @property
    def end(self) -> AircraftState:
        return self.states[-1]

    def as_array(self) -> np.ndarray:
        return np.array(self.states, dtype=float)

    def to_csv(self, path, t0: float = 0.0) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "y", "z", "chi"])
            for i, s in enumerate(self.states):
                w.writerow([repr(t0 + i * self.sample_period), *(repr(v) for v in s)])


def _samples(horizon: float, sample_period: float) -> np.ndarray:
    n = int(round(horizon / sample_period))
    if n < 1 or not math.isclose(n * sample_period, horizon, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError(f"horizon {horizon} is not an integer multiple of sample period {sample_period}")
    return np.arange(n + 1) * sample_period


def _integrate_array(s: AircraftState, a: MotionPrimitive, t: np.ndarray) -> np.ndarray:
    v2d = a.v2d
    rate = a.turn_rate
    x0, y0, z0, chi0 = s
    out = np.empty((t.size, 4))
    if rate == 0.0:
        out[:, 0] = x0 + v2d * t * math.cos(chi0)
        out[:, 1] = y0 + v2d * t * math.sin(chi0)
        out[:, 3] = chi0
    else:
        r = v2d / rate
        chi = chi0 + rate * t
        out[:, 0] = x0 + r * (np.sin(chi) - math.sin(chi0))
        out[:, 1] = y0 + r * (math.cos(chi0) - np.cos(chi))
        out[:, 3] = chi
    out[:, 2] = z0 + a.v_h * t
    out[:, 3] = (out[:, 3] + math.pi) % (2.0 * math.pi) - math.pi
    return out


def integrate(s: AircraftState, a: MotionPrimitive, horizon: float, sample_period: float) -> Segment:
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    arr = _integrate_array(s, a, _samples(horizon, sample_period))
    states = [AircraftState(float(x), float(y), float(z), wrap_angle(float(c))) for x, y, z, c in arr]
    return Segment(states, sample_period)


@dataclass(frozen=True, eq=False)
class PrimitiveLibrary:
    primitives: tuple[MotionPrimitive, ...]
    horizon: float = 20.0
    sample_period: float = 1.0
    # Body-frame samples of every primitive from the origin with heading 0,
    # shape (n_primitives, n_samples, 4); used by the planner's fast paths.
    offsets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        prims = tuple(self.primitives)
        if not prims:
            raise ValueError("primitive library is empty")
        if [p.id for p in prims] != list(range(len(prims))):
            raise ValueError("primitive ids must be 0..n-1 in order")
        t = _samples(self.horizon, self.sample_period)
        origin = AircraftState(0.0, 0.0, 0.0, 0.0)
        off = np.stack([_integrate_array(origin, p, t) for p in prims])
        # heading offsets stay unwrapped so they compose by addition
        off[:, :, 3] = np.array([p.turn_rate for p in prims])[:, None] * t[None, :]
        off.setflags(write=False)
        object.__setattr__(self, "primitives", prims)
        object.__setattr__(self, "offsets", off)

    def __len__(self):
        return len(self.primitives)

    def __getitem__(self, i: int) -> MotionPrimitive:
        return self.primitives[i]

    @property
    def n_samples(self) -> int:
        return self.offsets.shape[1]

    def sample_positions(self, s: AircraftState) -> np.ndarray:
        """Positions (n_primitives, n_samples, 3) of every primitive flown from ``s``."""
        c, sn = math.cos(s.chi), math.sin(s.chi)
        off = self.offsets
        out = np.empty(off.shape[:2] + (3,))
        out[..., 0] = s.x + c * off[..., 0] - sn * off[..., 1]
        out[..., 1] = s.y + sn * off[..., 0] + c * off[..., 1]
        out[..., 2] = s.z + off[..., 2]
        return out

    def end_state(self, s: AircraftState, a_id: int) -> AircraftState:
        """Final state of primitive ``a_id`` from ``s`` via the body-frame table."""
        dx, dy, dz, dchi = self.offsets[a_id, -1].tolist()
        c, sn = math.cos(s.chi), math.sin(s.chi)
        return AircraftState(
            s.x + c * dx - sn * dy, s.y + sn * dx + c * dy, s.z + dz, wrap_angle(s.chi + dchi)
        )

    def to_json(self) -> dict:
        return {
            "horizon_s": self.horizon,
            "sample_period_s": self.sample_period,
            "primitives": [
                {
                    "v_kt": p.v / KNOT,
                    "vh_fpm": p.v_h / FPM,
                    "dchi_deg": math.degrees(p.turn_rate * self.horizon),
                }
                for p in self.primitives
            ],
        }


def library_from_spec(
    rows: list[dict], horizon: float = 20.0, sample_period: float = 1.0
) -> PrimitiveLibrary:
    prims = [
        MotionPrimitive.from_heading_change(
            i, r["v_kt"] * KNOT, r["vh_fpm"] * FPM, math.radians(r["dchi_deg"]), horizon
        )
        for i, r in enumerate(rows)
    ]
    return PrimitiveLibrary(tuple(prims), horizon, sample_period)


def default_library() -> PrimitiveLibrary:
    """30 primitives: {70, 90} kt x {-500, 0, +500} ft/min x {-90, -45, 0, 45, 90} deg per 20 s."""
    rows = [
        {"v_kt": v, "vh_fpm": vh, "dchi_deg": d}
        for v, vh, d in itertools.product((70, 90), (-500, 0, 500), (-90, -45, 0, 45, 90))
    ]
    return library_from_spec(rows, 20.0, 1.0)


def load_library(path) -> PrimitiveLibrary:
    data = json.loads(Path(path).read_text())
    if isinstance(data, list):
        return library_from_spec(data)
    return library_from_spec(data["primitives"], data.get("horizon_s", 20.0), data.get("sample_period_s", 1.0))


def transition(s: AircraftState, a_id: int, lib: PrimitiveLibrary) -> tuple[AircraftState, Segment]:
    if not 0 <= a_id < len(lib):
        raise IndexError(f"unknown primitive id {a_id}")
    seg = integrate(s, lib[a_id], lib.horizon, lib.sample_period)
    return seg.end, seg
