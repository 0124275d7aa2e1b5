"""Monte Carlo Tree Search with an STL robustness term in the selection rule.

Each edge keeps a mean value Q, visit count N, prior P and mean STL
heuristic H. Selection maximizes::

    U(s, a) = Q(s, a) + c1 * P(s, a) * sqrt(N(s)) / (1 + N(s, a)) + c2 * H(s, a)

A simulation descends by U, adds one new leaf (prior from the policy, value
from the costmap) and backs the leaf value and the leaf's STL heuristic up
the visited edges. After the budget is spent, the executed action is sampled
in proportion to the root visit counts and the tree is rebuilt from the new
state.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import AircraftState, PrimitiveLibrary, transition
from .policy import CostmapSet, GoalVector, PolicyPrior
from .scenario import Airspace, Episode, derive_channels, episode_stl_score, spec_regions
from .stl import EmptyWindowError, Formula, Trace, robustness_signal
from .stl.ast import signals


class PlanningError(RuntimeError):
    pass


class BudgetTooSmall(PlanningError):
    pass


@dataclass(frozen=True)
class EdgeStats:
    Q: float = 0.0
    N: int = 0
    P: float = 0.0
    H: float = 0.0


def uct_score(e: EdgeStats, n_parent: int, c1: float, c2: float) -> float:
    return e.Q + c1 * e.P * math.sqrt(n_parent) / (1 + e.N) + c2 * e.H


def backup(mean: float, n_new: int, x: float, rule: str = "zero_seeded") -> float:
    """Fold ``x`` into an edge average whose visit count was just raised to ``n_new``.

    "zero_seeded" averages with the already-incremented count, (n*mean + x)/(1 + n),
    which is the mean of the samples plus one leading zero, so a fresh edge moves
    only halfway to ``x``. "mean" is the plain running mean.
    """
    if rule == "zero_seeded":
        return (n_new * mean + x) / (1 + n_new)
    return mean + (x - mean) / n_new


@dataclass
class PlannerConfig:
    c1: float = 1.0
    c2: float = 1.0
    budget_sims: int | None = 200
    budget_ms: float | None = None
    max_steps: int = 30
    max_depth: int = 40
    rho_scale: float | None = None  # None: airspace bounding-box half-diagonal
    rng_seed: int = 0
    backup: str = "zero_seeded"  # "zero_seeded" or "mean" (see ``backup``)
    h_origin: str = "zero"  # "zero": h = rho/scale; "root": h = (rho - rho at the tree root)/scale
    record_trees: bool = False

    def __post_init__(self):
        if not self.c1 > 0:
            raise ValueError("c1 must be positive")
        if self.budget_sims is None and self.budget_ms is None:
            raise ValueError("need a simulation-count or wall-clock budget")
        if self.budget_sims is not None and self.budget_sims <= 0:
            raise ValueError("budget_sims must be positive")
        if self.budget_ms is not None and self.budget_ms <= 0:
            raise ValueError("budget_ms must be positive")
        if self.rho_scale is not None and not self.rho_scale > 0:
            raise ValueError("rho_scale must be positive")
        if self.backup not in ("zero_seeded", "mean"):
            raise ValueError(f"unknown backup rule {self.backup!r}")
        if self.h_origin not in ("zero", "root"):
            raise ValueError(f"unknown heuristic origin {self.h_origin!r}")

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class PlannerDeps:
    prior: PolicyPrior
    costmaps: CostmapSet
    library: PrimitiveLibrary
    airspace: Airspace


class TreeNode:
    __slots__ = (
        "state", "depth", "parent", "expanded", "terminal", "value", "h",
        "Q", "N", "P", "H", "n_total", "children", "channels",
    )

    def __init__(self, state: AircraftState, depth: int, parent: "TreeNode | None", channels: np.ndarray):
        self.state = state
        self.depth = depth
        self.parent = parent
        self.expanded = False
        self.terminal: float | None = None
        self.value = 0.0
        self.h = 0.0
        self.Q = self.N = self.P = self.H = None
        self.n_total = 0
        self.children: list[TreeNode | None] = []
        # STL channel rows from the episode start through this node, (L, C)
        self.channels = channels

    def edge(self, a: int) -> EdgeStats:
        return EdgeStats(float(self.Q[a]), int(self.N[a]), float(self.P[a]), float(self.H[a]))

    def iter_edges(self):
        """(parent, action, child) for every created child, depth first."""
        stack = [self]
        while stack:
            node = stack.pop()
            for a, child in enumerate(node.children):
                if child is not None:
                    yield node, a, child
                    stack.append(child)


class Tree:
    """Search tree for one planning step of one episode (single writer)."""

    def __init__(
        self,
        history: Sequence[AircraftState],
        goal: str,
        spec: Formula,
        cfg: PlannerConfig,
        deps: PlannerDeps,
        start_region: str | None = None,
    ):
        self.cfg = cfg
        self.deps = deps
        self.goal = goal
        self.goal_vec = GoalVector.of(goal, deps.airspace.goal_set)
        self.spec = spec
        self.history = list(history)
        airspace = deps.airspace
        self.rho_scale = cfg.rho_scale or airspace.half_diagonal
        # channel layout: spec regions, then every goal-set region (terminal tests)
        needed = {s[2:] for s in signals(spec) if s.startswith("d_")}
        self.chan_regions = sorted(needed | set(spec_regions(airspace, goal)))
        self.chan_names = [f"d_{n}" for n in self.chan_regions] + ["in_goal"]
        self.all_regions = self.chan_regions + [goal] + list(airspace.goal_set)
        self.n_chan = len(self.chan_names)
        self.goal_cols = {g: self.n_chan + i for i, g in enumerate(airspace.goal_set)}
        self.others = [g for g in airspace.goal_set if g not in (goal, start_region)]
        missing = signals(spec) - set(self.chan_names)
        if missing:
            raise PlanningError(f"spec references signals with no derivable channel: {sorted(missing)}")
        step = airspace.step_seconds
        self._ts = np.arange(len(self.history) + cfg.max_depth + 2) * step
        self.root = TreeNode(self.history[-1], 0, None, self.channel_rows(self.history)[:, : self.n_chan])
        self.rho_origin = 0.0
        if cfg.h_origin == "root":
            self.rho_origin = self.robustness(self.root.channels)
        self.root.h = self.heuristic(self.root.channels)
        # the root may only end the search by already being at the goal
        if airspace.reached(goal, self.root.state):
            self.root.terminal = 1.0
        self.simulations = 0

    def channel_rows(self, states: Sequence[Sequence[float]]) -> np.ndarray:
        pts = np.array([s[:3] for s in states], dtype=float).reshape(-1, 3)
        return self.deps.airspace.distances(pts, self.all_regions)

    def robustness(self, rows: np.ndarray) -> float:
        n = rows.shape[0]
        chans = {name: rows[:, i] for i, name in enumerate(self.chan_names)}
        rho = float(robustness_signal(self.spec, self._ts[:n], chans)[0])
        if math.isnan(rho):
            raise EmptyWindowError("empty temporal window while scoring a search node")
        return rho

    def heuristic(self, rows: np.ndarray) -> float:
        return min(1.0, max(-1.0, (self.robustness(rows) - self.rho_origin) / self.rho_scale))

    def _terminal_value(self, row: np.ndarray, s: AircraftState) -> float | None:
        airspace = self.deps.airspace
        ceiling = airspace.landing_ceiling_m
        if row[self.goal_cols[self.goal]] >= 0.0 and (not airspace.is_runway(self.goal) or s.z < ceiling):
            return 1.0
        for g in self.others:
            if row[self.goal_cols[g]] >= 0.0 and (not airspace.is_runway(g) or s.z < ceiling):
                return 0.0
        return None

    def _child(self, node: TreeNode, a: int) -> TreeNode:
        child = node.children[a]
        if child is None:
            s = self.deps.library.end_state(node.state, a)
            row = self.deps.airspace.distances(np.array(s[:3]), self.all_regions)
            rows = np.vstack([node.channels, row[None, : self.n_chan]])
            child = TreeNode(s, node.depth + 1, node, rows)
            child.terminal = self._terminal_value(row, s)
            child.h = self.heuristic(rows)
            node.children[a] = child
        return child

    def _path_states(self, node: TreeNode) -> list[AircraftState]:
        path = []
        while node.parent is not None:
            path.append(node.state)
            node = node.parent
        return self.history + path[::-1]

    def _expand(self, node: TreeNode) -> None:
        n = len(self.deps.library)
        p = np.asarray(self.deps.prior(self._path_states(node), self.goal_vec), dtype=float)
        if p.shape != (n,):
            raise PlanningError(f"prior returned shape {p.shape}, expected ({n},)")
        node.P = p
        node.Q = np.zeros(n)
        node.N = np.zeros(n, dtype=np.int64)
        node.H = np.zeros(n)
        node.children = [None] * n
        node.value = self.deps.costmaps.value(node.state, self.goal)
        node.expanded = True

    def simulate(self, node: TreeNode, h_stl: float) -> tuple[float, float]:
        """One recursive simulation from ``node``; returns (value, h_stl)."""
        if node.terminal is not None:
            return node.terminal, h_stl
        if not node.expanded:
            self._expand(node)
            return node.value, h_stl
        if node.depth >= self.cfg.max_depth:
            return node.value, h_stl
        cfg = self.cfg
        u = node.Q + cfg.c1 * node.P * math.sqrt(node.n_total) / (1.0 + node.N) + cfg.c2 * node.H
        a = int(np.argmax(u))
        child = self._child(node, a)
        v, h_stl = self.simulate(child, child.h)
        n_new = int(node.N[a]) + 1
        node.N[a] = n_new
        node.n_total += 1
        node.Q[a] = backup(float(node.Q[a]), n_new, v, cfg.backup)
        node.H[a] = backup(float(node.H[a]), n_new, h_stl, cfg.backup)
        return v, h_stl

    def run(self) -> int:
        cfg = self.cfg
        deadline = None if cfg.budget_ms is None else time.perf_counter() + cfg.budget_ms / 1000.0
        done = 0
        while True:
            if cfg.budget_sims is not None and done >= cfg.budget_sims:
                break
            if deadline is not None and time.perf_counter() >= deadline:
                break
            self.simulate(self.root, self.root.h)
            done += 1
        self.simulations += done
        return done


def select_action(root: TreeNode, rng: np.random.Generator) -> int:
    counts = np.asarray(root.N if root.N is not None else [], dtype=float)
    total = counts.sum()
    if total <= 0:
        raise BudgetTooSmall("no root visits; the planning budget is too small")
    return int(rng.choice(counts.size, p=counts / total))


@dataclass
class EpisodeResult:
    trajectory: Trace  # primitive granularity: t, x, y, z, chi
    samples: Trace  # 1 Hz segment samples
    reached_goal: bool
    stl_score: float
    steps: int
    final_robustness: float
    actions: list[int] = field(default_factory=list)
    start_region: str = ""
    goal_region: str = ""
    spec_kind: str = ""
    tree_edges: list[tuple] = field(default_factory=list)  # (step, px, py, cx, cy, N)
    wall_time_s: float = 0.0

    @property
    def states(self) -> list[AircraftState]:
        c = self.trajectory.channels
        return [AircraftState(*vals) for vals in zip(c["x"], c["y"], c["z"], c["chi"])]


def _state_trace(states: Sequence[AircraftState], dt: float) -> Trace:
    arr = np.array(states, dtype=float).reshape(-1, 4)
    return Trace(np.arange(len(arr)) * dt, {"x": arr[:, 0], "y": arr[:, 1], "z": arr[:, 2], "chi": arr[:, 3]})


def plan_episode(
    start: AircraftState,
    goal: str,
    spec: Formula,
    cfg: PlannerConfig,
    deps: PlannerDeps,
    spec_kind: str | None = None,
    start_region: str | None = None,
) -> EpisodeResult:
    """Plan-act-replan loop until the goal is reached or ``max_steps`` run out."""
    t0 = time.perf_counter()
    airspace, lib = deps.airspace, deps.library
    if spec_kind is None:
        spec_kind = "landing" if airspace.is_runway(goal) else "takeoff"
    if start_region is None:
        start_region = airspace.goal_region_of(start)
    rng = np.random.default_rng(cfg.rng_seed)
    executed = [start]
    dense = [start]
    actions: list[int] = []
    edges: list[tuple] = []
    reached = airspace.reached(goal, start)
    while not reached and len(actions) < cfg.max_steps:
        tree = Tree(executed, goal, spec, cfg, deps, start_region)
        tree.run()
        a = select_action(tree.root, rng)
        if cfg.record_trees:
            step = len(actions)
            for parent, ai, child in tree.root.iter_edges():
                edges.append((step, parent.state.x, parent.state.y, child.state.x, child.state.y, int(parent.N[ai])))
        nxt, seg = transition(executed[-1], a, lib)
        actions.append(a)
        executed.append(nxt)
        dense.extend(seg.states[1:])
        reached = airspace.reached(goal, nxt)
    trace = derive_channels(airspace, executed, goal)
    score, rho = episode_stl_score(trace, spec, spec_kind, airspace, goal)
    return EpisodeResult(
        trajectory=_state_trace(executed, airspace.step_seconds),
        samples=_state_trace(dense, lib.sample_period),
        reached_goal=bool(reached),
        stl_score=score,
        steps=len(actions),
        final_robustness=rho,
        actions=actions,
        start_region=start_region or "",
        goal_region=goal,
        spec_kind=spec_kind,
        tree_edges=edges,
        wall_time_s=time.perf_counter() - t0,
    )


def plan_scenario_episode(ep: Episode, cfg: PlannerConfig, deps: PlannerDeps) -> EpisodeResult:
    return plan_episode(ep.start_state, ep.goal_region, ep.spec, cfg, deps, ep.spec_kind, ep.start_region)
