"""Synthetic pilot demonstrations for building costmaps.

Demonstrations are flown with the primitive library by a greedy two-step
lookahead waypoint follower. Landing demonstrations mix full traffic
patterns with straight-in and direct approaches, so the resulting costmaps
carry no particular bias toward the pattern rules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import AircraftState, PrimitiveLibrary, transition
from .policy import Costmap, build_costmap_from_traces, grid_for
from .scenario import Airspace, sample_start_state
from .stl import Trace


@dataclass
class DemoConfig:
    per_pair: int = 6
    pattern_fraction: float = 0.5
    straight_in_fraction: float = 0.25  # remainder flies direct to the threshold
    waypoint_jitter_m: float = 250.0
    epsilon: float = 0.15
    max_steps: int = 60
    capture_m: float = 700.0
    dwell_steps: int = 0  # steps flown on toward the goal center after arriving (non-runway goals)
    z_weight: float = 3.0
    resolution: tuple[float, float, float] = (400.0, 400.0, 200.0)
    smooth_cells: float = 1.0


def _runway_frame(airspace: Airspace, rw: str) -> tuple[float, float, float, float]:
    """(threshold x, threshold y, landing direction sign along x, pattern side sign along y)."""
    r = airspace.regions[rw]
    runway = airspace.runways[rw]
    sign = 1.0 if math.cos(runway.heading) >= 0 else -1.0
    down = airspace.regions[runway.downwind]
    side = 1.0 if down.center[1] >= r.center[1] else -1.0
    # threshold at the goal box edge nearest the approach, nudged inside
    tx = r.center[0]
    return tx, r.center[1], sign, side


def landing_waypoints(airspace: Airspace, rw: str, kind: str) -> list[tuple[float, float, float]]:
    tx, ty, sign, side = _runway_frame(airspace, rw)
    pat = airspace.pattern_altitude_m
    runway = airspace.runways[rw]
    down = airspace.regions[runway.downwind].center
    base = airspace.regions[runway.base].center
    final = airspace.regions[runway.final]
    touchdown = (tx, ty, 0.0)
    if kind == "pattern":
        dy = down[1]
        return [
            (tx + sign * 2500.0, dy, pat),
            (tx - sign * 2200.0, dy, pat - 20.0),
            (base[0], ty + side * 900.0, pat - 110.0),
            (tx - sign * 2200.0, ty, 110.0),
            touchdown,
        ]
    if kind == "straight_in":
        far = final.lo[0] + 500.0 if sign > 0 else final.hi[0] - 500.0
        return [(far, ty, 160.0), touchdown]
    return [touchdown]


def takeoff_waypoints(airspace: Airspace, rw: str, goal: str, direct: bool) -> list[tuple[float, float, float]]:
    tx, ty, sign, _ = _runway_frame(airspace, rw)
    g = airspace.regions[goal].center
    target = (g[0], g[1], airspace.pattern_altitude_m + 150.0)
    if direct:
        return [target]
    return [(tx + sign * 2500.0, ty, 250.0), target]


def fly_waypoints(
    start: AircraftState,
    waypoints,
    lib: PrimitiveLibrary,
    airspace: Airspace,
    goal: str,
    rng: np.random.Generator,
    cfg: DemoConfig,
) -> list[AircraftState]:
    """Dense (sample-period) states of a greedy waypoint-following flight."""
    s = start
    dense = [s]
    wi = 0
    wz = cfg.z_weight
    dwell = 0 if goal in airspace.runways else cfg.dwell_steps
    arrived = 0
    for _ in range(cfg.max_steps):
        if airspace.reached(goal, s):
            if arrived >= dwell:
                break
            arrived += 1
            wi = len(waypoints) - 1
        wp = np.asarray(waypoints[wi], dtype=float)
        ends1 = _end_poses(np.array([s]), lib)[0]  # (n, 4)
        ends2 = _end_poses(ends1, lib)  # (n, n, 4)
        scale = np.array([1.0, 1.0, wz])
        d1 = np.sum(((ends1[:, :3] - wp) * scale) ** 2, axis=-1)
        d2 = np.min(np.sum(((ends2[..., :3] - wp) * scale) ** 2, axis=-1), axis=1)
        costs = np.minimum(d1, d2)
        order = np.argsort(costs, kind="stable")
        a = int(order[rng.integers(4)]) if rng.random() < cfg.epsilon else int(order[0])
        s, seg = transition(s, a, lib)
        dense.extend(seg.states[1:])
        if math.hypot(s.x - wp[0], s.y - wp[1]) < cfg.capture_m and wi < len(waypoints) - 1:
            wi += 1
    return dense


def _end_poses(poses: np.ndarray, lib: PrimitiveLibrary) -> np.ndarray:
    """End poses (m, n, 4) of every primitive flown from each of ``poses`` (m, 4)."""
    off = lib.offsets[:, -1, :]
    c, sn = np.cos(poses[:, 3])[:, None], np.sin(poses[:, 3])[:, None]
    out = np.empty((len(poses), len(lib), 4))
    out[..., 0] = poses[:, 0:1] + c * off[:, 0] - sn * off[:, 1]
    out[..., 1] = poses[:, 1:2] + sn * off[:, 0] + c * off[:, 1]
    out[..., 2] = poses[:, 2:3] + off[:, 2]
    out[..., 3] = poses[:, 3:4] + off[:, 3]
    return out


def _jitter(wps, rng, sigma):
    out = [(x + rng.normal(0, sigma), y + rng.normal(0, sigma), z) for x, y, z in wps[:-1]]
    return out + [wps[-1]]


def reference_demos(
    airspace: Airspace, lib: PrimitiveLibrary, rng: np.random.Generator, cfg: DemoConfig | None = None
) -> dict[str, list[Trace]]:
    """Demonstration traces (channels x, y, z, chi at the sample period) keyed by goal."""
    cfg = cfg or DemoConfig()
    demos: dict[str, list[Trace]] = {g: [] for g in airspace.goal_set}
    for goal in airspace.goal_set:
        for start_region in airspace.goal_set:
            if start_region == goal:
                continue
            for _ in range(cfg.per_pair):
                s0 = sample_start_state(airspace, start_region, rng)
                if goal in airspace.runways:
                    u = rng.random()
                    kind = (
                        "pattern"
                        if u < cfg.pattern_fraction
                        else "straight_in"
                        if u < cfg.pattern_fraction + cfg.straight_in_fraction
                        else "direct"
                    )
                    wps = landing_waypoints(airspace, goal, kind)
                elif start_region in airspace.runways:
                    wps = takeoff_waypoints(airspace, start_region, goal, direct=rng.random() < 0.5)
                else:
                    g = airspace.regions[goal].center
                    wps = [(g[0], g[1], airspace.pattern_altitude_m)]
                states = fly_waypoints(s0, _jitter(wps, rng, cfg.waypoint_jitter_m), lib, airspace, goal, rng, cfg)
                arr = np.array(states)
                demos[goal].append(
                    Trace(
                        np.arange(len(arr)) * lib.sample_period,
                        {"x": arr[:, 0], "y": arr[:, 1], "z": arr[:, 2], "chi": arr[:, 3]},
                    )
                )
    return demos


def reference_costmaps(
    airspace: Airspace, lib: PrimitiveLibrary, seed: int = 0, cfg: DemoConfig | None = None
) -> dict[str, Costmap]:
    """Per-goal frequency costmaps from synthetic demonstrations."""
    cfg = cfg or DemoConfig()
    demos = reference_demos(airspace, lib, np.random.default_rng(seed), cfg)
    b = airspace.bounding_box
    origin, res, dims = grid_for(b.lo, b.hi, cfg.resolution)
    return {g: build_costmap_from_traces(tr, origin, res, dims, cfg.smooth_cells) for g, tr in demos.items() if tr}
