"""Episode suites: run start-goal classes, aggregate Success Rate and STL Score,
and write plot-ready artifacts.

Classes are direction x kind: ``takeoff`` flies from a runway end to the
direction's goal box, ``landing`` from the direction's box to a runway end.
Each episode draws its runway, start state and planner seed from a seed
sequence keyed on (suite seed, class index, episode index), so two suites
that differ only in ``stl_enabled`` fly the same episodes.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .dynamics import PrimitiveLibrary, default_library, load_library
from .planner import EpisodeResult, PlannerConfig, PlannerDeps, plan_scenario_episode
from .policy import Costmap, CostmapSet, ReplayPrior, costmap_prior, uniform_prior
from .reference import DemoConfig, reference_costmaps
from .scenario import Airspace, build_spec, default_airspace, derive_channels, episode_stl_score, load_airspace, sample_episode

KINDS = ("takeoff", "landing")


def stl_score(episode: EpisodeResult, spec_kind: str, airspace: Airspace) -> float:
    """Stage-fraction STL score of a finished episode (see ``episode_stl_score``)."""
    spec, kind = build_spec(airspace, episode.goal_region)
    if kind != spec_kind:
        raise ValueError(f"goal {episode.goal_region!r} implies a {kind} spec, not {spec_kind}")
    trace = derive_channels(airspace, episode.states, episode.goal_region)
    return episode_stl_score(trace, spec, spec_kind, airspace, episode.goal_region)[0]


# configuration ---------------------------------------------------------------


@dataclass
class SuiteConfig:
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    stl_enabled: bool = True
    episodes_per_class: int = 5
    directions: tuple[str, ...] = ("N", "S", "E", "W")
    seed: int = 0
    scenario: str | None = None  # airspace JSON; None: built-in field
    library: str | None = None  # primitive library JSON; None: built-in 30 primitives
    prior: str = "costmap"  # uniform | costmap | replay
    prior_path: str | None = None  # replay table for prior="replay"
    costmap: str | None = None  # costmap JSON; None: synthetic demonstrations
    costmap_seed: int = 0
    temperature: float = 0.1
    out_dir: str | None = None

    def __post_init__(self):
        if isinstance(self.planner, dict):
            self.planner = PlannerConfig(**self.planner)
        self.directions = tuple(self.directions)
        if self.episodes_per_class < 1:
            raise ValueError("episodes_per_class must be >= 1")
        if not self.directions:
            raise ValueError("need at least one direction")
        if self.prior not in ("uniform", "costmap", "replay"):
            raise ValueError(f"unknown prior {self.prior!r}")
        if self.prior == "replay" and not self.prior_path:
            raise ValueError("prior 'replay' needs prior_path")
        for name in ("scenario", "library", "prior_path", "costmap"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                raise FileNotFoundError(f"{name} file not found: {path}")

    @property
    def effective_planner(self) -> PlannerConfig:
        return self.planner if self.stl_enabled else replace(self.planner, c2=0.0)

    def to_json(self) -> dict:
        d = asdict(self)
        d["directions"] = list(self.directions)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "SuiteConfig":
        return cls(**d)

    @classmethod
    def load(cls, path) -> "SuiteConfig":
        return cls.from_json(json.loads(Path(path).read_text()))


def load_costmaps(path) -> CostmapSet:
    """A single costmap JSON, or ``{"maps": {goal: costmap}}`` (``"*"`` = fallback)."""
    d = json.loads(Path(path).read_text())
    if "maps" in d:
        return CostmapSet({g: Costmap.from_json(m) for g, m in d["maps"].items()})
    return CostmapSet(Costmap.from_json(d))


def save_costmaps(maps: dict[str, Costmap], path) -> None:
    Path(path).write_text(json.dumps({"maps": {g: c.to_json() for g, c in maps.items()}}))


@lru_cache(maxsize=4)
def _synthetic_costmaps(seed: int) -> CostmapSet:
    return CostmapSet(reference_costmaps(default_airspace(), default_library(), seed, DemoConfig()))


def build_deps(cfg: SuiteConfig) -> PlannerDeps:
    airspace = load_airspace(cfg.scenario) if cfg.scenario else default_airspace()
    lib: PrimitiveLibrary = load_library(cfg.library) if cfg.library else default_library()
    if cfg.costmap:
        costmaps = load_costmaps(cfg.costmap)
    elif cfg.scenario is None and cfg.library is None:
        costmaps = _synthetic_costmaps(cfg.costmap_seed)
    else:
        costmaps = CostmapSet(reference_costmaps(airspace, lib, cfg.costmap_seed))
    if cfg.prior == "uniform":
        prior = uniform_prior(lib)
    elif cfg.prior == "replay":
        prior = ReplayPrior.load(cfg.prior_path)
        if prior.size != len(lib):
            raise ValueError(f"replay prior has {prior.size} actions, library has {len(lib)}")
    else:
        prior = costmap_prior(costmaps, lib, cfg.temperature)
    return PlannerDeps(prior, costmaps, lib, airspace)


# report ----------------------------------------------------------------------


@dataclass
class EpisodeRow:
    index: int
    cls: str  # "<direction>-<kind>"
    start: str
    goal: str
    seed: int
    steps: int
    success: bool
    score: float
    robustness: float | None
    error: str | None = None
    wall_time_s: float = field(default=0.0, compare=False)


@dataclass
class ClassStats:
    episodes: int
    success_rate: float
    stl_score: float


@dataclass
class SuiteReport:
    stl_enabled: bool
    classes: dict[str, ClassStats]
    success_rate: float
    stl_score: float
    rows: list[EpisodeRow]

    @classmethod
    def from_rows(cls, rows: list[EpisodeRow], stl_enabled: bool) -> "SuiteReport":
        if not rows:
            raise ValueError("no episodes to aggregate")
        groups: dict[str, list[EpisodeRow]] = {}
        for r in rows:
            groups.setdefault(r.cls, []).append(r)
        classes = {
            name: ClassStats(len(g), sum(r.success for r in g) / len(g), sum(r.score for r in g) / len(g))
            for name, g in groups.items()
        }
        n = len(rows)
        success = sum(c.success_rate * c.episodes for c in classes.values()) / n
        score = sum(c.stl_score * c.episodes for c in classes.values()) / n
        return cls(stl_enabled, classes, success, score, list(rows))

    def kind_stats(self, kind: str) -> ClassStats:
        rows = [r for r in self.rows if r.cls.endswith("-" + kind)]
        if not rows:
            return ClassStats(0, 0.0, 0.0)
        return ClassStats(len(rows), sum(r.success for r in rows) / len(rows), sum(r.score for r in rows) / len(rows))

    def to_json(self) -> dict:
        """Deterministic content only: wall-clock times are left to report.csv."""
        rows = []
        for r in self.rows:
            d = asdict(r)
            del d["wall_time_s"]
            rows.append(d)
        return {
            "stl_enabled": self.stl_enabled,
            "success_rate": self.success_rate,
            "stl_score": self.stl_score,
            "classes": {k: asdict(v) for k, v in self.classes.items()},
            "rows": rows,
        }

    @classmethod
    def from_json(cls, d: dict) -> "SuiteReport":
        return cls(
            d["stl_enabled"],
            {k: ClassStats(**v) for k, v in d["classes"].items()},
            d["success_rate"],
            d["stl_score"],
            [EpisodeRow(**r) for r in d["rows"]],
        )

    def table(self) -> str:
        lines = [f"{'class':<12} {'n':>3} {'success':>8} {'stl':>6}"]
        for name, c in self.classes.items():
            lines.append(f"{name:<12} {c.episodes:>3} {c.success_rate:>8.2f} {c.stl_score:>6.2f}")
        lines.append(f"{'total':<12} {len(self.rows):>3} {self.success_rate:>8.2f} {self.stl_score:>6.2f}")
        return "\n".join(lines)


# running ---------------------------------------------------------------------


def episode_plan(cfg: SuiteConfig, airspace: Airspace) -> list[tuple[int, str, str, str, np.random.SeedSequence]]:
    """(index, class, start, goal, seed sequence) for every episode, in run order."""
    runways = list(airspace.runways)
    if not runways:
        raise ValueError("airspace has no runways")
    out = []
    ci = 0
    for d in cfg.directions:
        if d not in airspace.goal_set:
            raise ValueError(f"direction {d!r} is not in the goal set")
        for kind in KINDS:
            for k in range(cfg.episodes_per_class):
                ss = np.random.SeedSequence([cfg.seed, ci, k])
                rw = runways[int(np.random.default_rng(ss.spawn(1)[0]).integers(len(runways)))]
                start, goal = (rw, d) if kind == "takeoff" else (d, rw)
                out.append((len(out), f"{d}-{kind}", start, goal, ss))
            ci += 1
    return out


def run_episodes(cfg: SuiteConfig, deps: PlannerDeps | None = None) -> tuple[SuiteReport, list[EpisodeResult | None]]:
    deps = deps or build_deps(cfg)
    planner = cfg.effective_planner
    rows: list[EpisodeRow] = []
    results: list[EpisodeResult | None] = []
    for index, cls, start, goal, ss in episode_plan(cfg, deps.airspace):
        ep_rng = np.random.default_rng(ss)
        seed = int(ss.generate_state(1)[0])
        t0 = time.perf_counter()
        try:
            ep = sample_episode(deps.airspace, ep_rng, start, goal)
            res = plan_scenario_episode(ep, replace(planner, rng_seed=seed), deps)
            rows.append(
                EpisodeRow(
                    index, cls, start, goal, seed, res.steps, res.reached_goal, res.stl_score,
                    _finite_or_none(res.final_robustness), None, res.wall_time_s,
                )
            )
            results.append(res)
        except Exception as exc:  # recorded per episode, counted as a failure
            rows.append(
                EpisodeRow(index, cls, start, goal, seed, 0, False, 0.0, None, f"{type(exc).__name__}: {exc}",
                           time.perf_counter() - t0)
            )
            results.append(None)
    return SuiteReport.from_rows(rows, cfg.stl_enabled), results


def run_suite(cfg: SuiteConfig, deps: PlannerDeps | None = None) -> SuiteReport:
    report, results = run_episodes(cfg, deps)
    if cfg.out_dir:
        export_artifacts(report, results, cfg.out_dir)
    return report


def _finite_or_none(x: float) -> float | None:
    return float(x) if math.isfinite(x) else None


# artifacts -------------------------------------------------------------------


def export_artifacts(report: SuiteReport, episodes: list[EpisodeResult | None], out_dir) -> list[Path]:
    """report.json, report.csv, and per-episode trajectory and tree-edge CSVs."""
    out = Path(out_dir)
    written: list[Path] = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        p = out / "report.json"
        p.write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
        written.append(p)
        p = out / "report.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            cols = list(EpisodeRow.__dataclass_fields__)
            w.writerow(cols)
            for r in report.rows:
                w.writerow([getattr(r, c) for c in cols])
        written.append(p)
        for row, res in zip(report.rows, episodes):
            if res is None:
                continue
            written.append(write_trajectory_csv(res, out / "trajectories" / f"episode_{row.index:03d}.csv"))
            written.append(write_tree_csv(res, out / "trees" / f"episode_{row.index:03d}.csv"))
    except OSError as exc:
        raise OSError(f"could not write artifacts under {out}: {exc}") from exc
    return written


def write_trajectory_csv(res: EpisodeResult, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    res.trajectory.to_csv(path)
    return path


def write_tree_csv(res: EpisodeResult, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "parent_x", "parent_y", "child_x", "child_y", "N"])
        w.writerows(res.tree_edges)
    return path
