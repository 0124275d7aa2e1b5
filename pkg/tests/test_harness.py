import csv
import json
import math
from dataclasses import replace

import numpy as np
import pytest

from stlmcts.dynamics import AircraftState
from stlmcts.harness import (
    ClassStats,
    EpisodeRow,
    SuiteConfig,
    SuiteReport,
    build_deps,
    episode_plan,
    export_artifacts,
    load_costmaps,
    run_episodes,
    run_suite,
    save_costmaps,
    stl_score,
)
from stlmcts.planner import EpisodeResult, PlannerConfig, _state_trace
from stlmcts.policy import Costmap
from stlmcts.scenario import default_airspace

AIR = default_airspace()
SMALL = PlannerConfig(budget_sims=25, max_steps=3)


def row(i, cls, success, score):
    return EpisodeRow(i, cls, "a", "b", i, 1, success, score, 0.0)


def fake_episode(points, goal):
    states = [AircraftState(x, y, z, 0.0) for x, y, z in points]
    kind = "landing" if goal.startswith("R") else "takeoff"
    return EpisodeResult(_state_trace(states, 20.0), _state_trace(states, 20.0), False, 0.0, len(states) - 1, 0.0,
                         goal_region=goal, spec_kind=kind)


def pattern_points(rw):
    return [AIR.regions[f"{leg}_{rw}"].center for leg in ("downwind", "base", "final")]


# scoring -----------------------------------------------------------------


def test_stl_score_full_pattern():
    assert stl_score(fake_episode(pattern_points("R26"), "R26"), "landing", AIR) == 1.0


def test_stl_score_downwind_only():
    dw = pattern_points("R08")[0]
    ep = fake_episode([(0.0, -6000.0, 300.0), dw, (3000.0, 4000.0, 300.0)], "R08")
    assert stl_score(ep, "landing", AIR) == pytest.approx(1 / 3)


def test_stl_score_takeoff_never_reaching_goal():
    assert stl_score(fake_episode([(0.0, 0.0, 10.0), (700.0, 0.0, 60.0)], "N"), "takeoff", AIR) == 0.0


def test_stl_score_rejects_wrong_kind():
    with pytest.raises(ValueError):
        stl_score(fake_episode([(0.0, 0.0, 10.0)], "N"), "landing", AIR)


def test_stl_score_monotone_in_ordered_stages():
    dw, base, final = pattern_points("R26")
    lead = [(0.0, -7000.0, 300.0)]
    scores = [
        stl_score(fake_episode(lead + pts, "R26"), "landing", AIR)
        for pts in ([], [dw], [dw, base], [dw, base, final])
    ]
    assert scores == sorted(scores)
    assert scores == pytest.approx([0.0, 1 / 3, 2 / 3, 1.0])


# aggregation -------------------------------------------------------------


def test_zero_successes():
    rep = SuiteReport.from_rows([row(0, "N-takeoff", False, 0.0), row(1, "N-landing", False, 0.0)], True)
    assert rep.success_rate == 0.0


def test_equal_class_sizes_average():
    rows = [row(0, "N-takeoff", True, 1.0), row(1, "N-takeoff", True, 1.0), row(2, "S-landing", False, 0.5),
            row(3, "S-landing", True, 0.5)]
    rep = SuiteReport.from_rows(rows, True)
    assert rep.stl_score == 0.75
    assert rep.classes["S-landing"] == ClassStats(2, 0.5, 0.5)


def test_totals_are_episode_weighted():
    rng = np.random.default_rng(3)
    rows = [row(i, f"{d}-landing", bool(rng.integers(2)), float(rng.choice([0, 1 / 3, 2 / 3, 1])))
            for i, d in enumerate(rng.choice(list("NSEW"), 37))]
    rep = SuiteReport.from_rows(rows, False)
    assert abs(rep.success_rate - np.mean([r.success for r in rows])) <= 1e-12
    assert abs(rep.stl_score - np.mean([r.score for r in rows])) <= 1e-12
    assert rep.kind_stats("landing").episodes == 37 and rep.kind_stats("takeoff").episodes == 0


def test_empty_report_rejected():
    with pytest.raises(ValueError):
        SuiteReport.from_rows([], True)


# configuration -----------------------------------------------------------


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        SuiteConfig(episodes_per_class=0)
    with pytest.raises(ValueError):
        SuiteConfig(prior="replay")
    with pytest.raises(FileNotFoundError):
        SuiteConfig(scenario=str(tmp_path / "missing.json"))
    with pytest.raises(ValueError):
        SuiteConfig(prior="learned")


def test_config_json_round_trip(tmp_path):
    cfg = SuiteConfig(planner=PlannerConfig(c2=3.0, rho_scale=300.0), stl_enabled=False, seed=4)
    (tmp_path / "cfg.json").write_text(json.dumps(cfg.to_json()))
    again = SuiteConfig.load(tmp_path / "cfg.json")
    assert again == cfg
    assert again.effective_planner.c2 == 0.0 and cfg.planner.c2 == 3.0


def test_episode_plan_classes_and_pairing():
    cfg = SuiteConfig(episodes_per_class=3)
    plan = episode_plan(cfg, AIR)
    assert len(plan) == 4 * 2 * 3
    assert {p[1] for p in plan} == {f"{d}-{k}" for d in "NSEW" for k in ("takeoff", "landing")}
    for _, cls, start, goal, _ in plan:
        d, kind = cls.split("-")
        assert (start, goal)[0 if kind == "takeoff" else 1] in AIR.runways
        assert d in (start, goal)
    other = episode_plan(replace(cfg, stl_enabled=False), AIR)
    assert [p[:4] for p in plan] == [p[:4] for p in other]


def test_costmap_file_formats(tmp_path):
    c = Costmap((0, 0, 0), (1, 1, 1), (1, 1, 1), [0.5])
    c.save(tmp_path / "one.json")
    assert load_costmaps(tmp_path / "one.json").for_goal("anything") == c
    save_costmaps({"N": c, "*": c}, tmp_path / "many.json")
    maps = load_costmaps(tmp_path / "many.json")
    assert maps.for_goal("N") == c and maps.for_goal("S") == c


# running -----------------------------------------------------------------


@pytest.fixture(scope="module")
def small_cfg():
    return SuiteConfig(planner=SMALL, episodes_per_class=1, directions=("N", "E"), seed=2)


@pytest.fixture(scope="module")
def small_deps(small_cfg):
    return build_deps(small_cfg)


def test_suite_is_reproducible(tmp_path, small_cfg, small_deps):
    a = run_suite(replace(small_cfg, out_dir=str(tmp_path / "a")), small_deps)
    b = run_suite(replace(small_cfg, out_dir=str(tmp_path / "b")), small_deps)
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()
    assert a == b
    assert len(a.rows) == 4 and all(r.error is None for r in a.rows)


def test_artifacts(tmp_path, small_cfg, small_deps):
    small = replace(small_cfg, planner=replace(SMALL, record_trees=True))
    report, results = run_episodes(small, small_deps)
    written = export_artifacts(report, results, tmp_path)
    assert all(p.exists() for p in written)
    assert SuiteReport.from_json(json.loads((tmp_path / "report.json").read_text())) == report
    with open(tmp_path / "report.csv") as fh:
        assert len(list(csv.DictReader(fh))) == len(report.rows)
    for r, res in zip(report.rows, results):
        with open(tmp_path / "trajectories" / f"episode_{r.index:03d}.csv") as fh:
            traj = list(csv.reader(fh))
        assert traj[0] == ["t", "x", "y", "z", "chi"]
        assert len(traj) - 1 == r.steps + 1 == len(res.trajectory)
        with open(tmp_path / "trees" / f"episode_{r.index:03d}.csv") as fh:
            tree = list(csv.reader(fh))
        assert tree[0] == ["step", "parent_x", "parent_y", "child_x", "child_y", "N"]
        assert len(tree) - 1 == len(res.tree_edges) > 0


def test_artifact_errors_name_the_path(tmp_path, small_cfg, small_deps):
    report, results = run_episodes(small_cfg, small_deps)
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match=str(blocker)):
        export_artifacts(report, results, blocker / "sub")


def test_component_errors_become_failed_rows(small_cfg, small_deps):
    def broken_prior(history, goal):
        raise RuntimeError("prior offline")

    deps = replace(small_deps, prior=broken_prior)
    report, results = run_episodes(small_cfg, deps)
    assert results == [None] * 4
    assert all(r.error == "RuntimeError: prior offline" and not r.success for r in report.rows)
    assert report.success_rate == 0.0 and report.stl_score == 0.0


def test_robustness_recorded(small_cfg, small_deps):
    report, results = run_episodes(small_cfg, small_deps)
    for r, res in zip(report.rows, results):
        assert r.robustness == res.final_robustness
        assert math.isfinite(r.robustness)
        assert r.score == stl_score(res, res.spec_kind, small_deps.airspace)
