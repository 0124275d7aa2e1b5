"""Acceptance criteria, each run at its stated tolerance.

Every test appends one PASS/FAIL line that is printed in the pytest
terminal summary (and to stdout when run with ``-s``).
"""

import math
import random
import time
from dataclasses import replace

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from stl_oracle import OracleEmptyWindow, random_formula, random_trace, rho
from stlmcts.dynamics import AircraftState, default_library, transition, wrap_angle
from stlmcts.harness import SuiteConfig, build_deps, run_suite
from stlmcts.planner import EdgeStats, PlannerConfig, Tree, TreeNode, backup, select_action, uct_score
from stlmcts.stl import EmptyWindowError, STLSyntaxError, Trace, parse_formula, print_formula, robustness
from test_planner import REACH_B, one_step_goal_deps
from test_stl import MALFORMED

# Planner settings for the STL ablation suites; the baseline arm is the same
# configuration with c2 = 0.
ABLATION_PLANNER = PlannerConfig(c1=1.0, c2=3.0, budget_sims=2000, max_steps=40, rho_scale=300.0)
ABLATION_SEED = 0


def record(name: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


# ablation ----------------------------------------------------------------


@pytest.fixture(scope="module")
def ablation():
    cfg = SuiteConfig(planner=ABLATION_PLANNER, stl_enabled=True, seed=ABLATION_SEED)
    deps = build_deps(cfg)
    t0 = time.perf_counter()
    with_stl = run_suite(cfg, deps)
    without_stl = run_suite(replace(cfg, stl_enabled=False), deps)
    elapsed = time.perf_counter() - t0
    print(with_stl.table())
    print(without_stl.table())
    return with_stl, without_stl, elapsed


def test_ablation_stl_improves_score(ablation):
    with_stl, without_stl, elapsed = ablation
    gap = with_stl.stl_score - without_stl.stl_score
    ok = gap >= 0.15 and with_stl.stl_score >= 0.6 and elapsed < 600.0
    record(
        "STL ablation",
        ok,
        f"STL score {with_stl.stl_score:.3f} vs {without_stl.stl_score:.3f} without (gap {gap:+.3f}, need >= 0.15; "
        f"STL total need >= 0.6) over {len(with_stl.rows)} paired episodes in {elapsed:.0f} s (need < 600 s)",
    )
    assert gap >= 0.15
    assert with_stl.stl_score >= 0.6
    assert elapsed < 600.0


def test_takeoff_success(ablation):
    takeoff = ablation[0].kind_stats("takeoff")
    ok = takeoff.episodes == 20 and takeoff.success_rate >= 0.9
    record("takeoff success", ok, f"{takeoff.success_rate:.2f} over {takeoff.episodes} STL-enabled takeoffs (need >= 0.9)")
    assert takeoff.episodes == 20
    assert takeoff.success_rate >= 0.9


# monitor -------------------------------------------------------------------


def test_monitor_matches_oracle():
    r = random.Random(20240601)
    t0 = time.perf_counter()
    mismatches = checked = 0
    for _ in range(1000):
        f = random_formula(r, 4)
        ts, ch = random_trace(r, max_len=12)
        tr = Trace(ts, ch)
        for t in range(len(ts)):
            try:
                expected = rho(f, ts, ch, t)
            except OracleEmptyWindow:
                expected = None
            try:
                got = robustness(f, tr, t)
            except EmptyWindowError:
                got = None
            checked += 1
            mismatches += got != expected
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 30.0
    record("monitor oracle", ok, f"{mismatches} mismatches over 1000 formulas / {checked} evaluations in {elapsed:.1f} s")
    assert mismatches == 0
    assert elapsed < 30.0


# kinematics --------------------------------------------------------------


def test_primitive_kinematics():
    lib = default_library()
    s0 = AircraftState(120.0, -340.0, 300.0, 0.7)
    t0 = time.perf_counter()
    heading_err = radius_err = speed_err = 0.0
    for p in lib.primitives:
        seg = transition(s0, p.id, lib)[1]
        for i, s in enumerate(seg.states):
            t = i * lib.sample_period
            heading_err = max(heading_err, abs(wrap_angle(s.chi - (s0.chi + p.turn_rate * t))))
        heading_err = max(heading_err, abs(wrap_angle(seg.end.chi - s0.chi - p.turn_rate * lib.horizon)))
        if p.turn_rate != 0.0:
            r = p.v2d / p.turn_rate
            cx, cy = s0.x - r * math.sin(s0.chi), s0.y + r * math.cos(s0.chi)
            for s in seg.states:
                radius_err = max(radius_err, abs(math.hypot(s.x - cx, s.y - cy) - abs(r)))
        speed_err = max(speed_err, abs(p.v**2 - (p.v2d**2 + p.v_h**2)))
    elapsed = time.perf_counter() - t0
    ok = len(lib) == 30 and heading_err < 1e-9 and radius_err < 1e-6 and speed_err < 1e-9 and elapsed < 1.0
    record(
        "kinematics",
        ok,
        f"heading {heading_err:.1e} rad, radius {radius_err:.1e} m, speed identity {speed_err:.1e} over 30 primitives in {elapsed:.3f} s",
    )
    assert ok


# backup -------------------------------------------------------------------


def test_backup_fidelity():
    # a live tree whose only explored edge ends in the goal, compared after every backup
    start, deps = one_step_goal_deps()
    tree = Tree([start], "G", REACH_B, PlannerConfig(c2=0.0, budget_sims=1), deps, "S")
    tree.run()  # expands the root
    q_ref = h_ref = 0.0
    n_ref = 0
    exact = True
    for _ in range(20):
        tree.run()
        h = tree.root.children[0].h
        n_ref += 1
        q_ref = (n_ref * q_ref + 1.0) / (1 + n_ref)
        h_ref = (n_ref * h_ref + h) / (1 + n_ref)
        exact &= tree.root.N[0] == n_ref and tree.root.Q[0] == q_ref and tree.root.H[0] == h_ref
    rng = np.random.default_rng(7)
    for _ in range(200):
        vals = rng.uniform(-1, 1, int(rng.integers(1, 21)))
        q = ref = 0.0
        for n, v in enumerate(vals, start=1):
            q = backup(q, n, float(v))
            ref = (n * ref + float(v)) / (1 + n)
            exact &= q == ref
    q = 0.0
    for k in range(1, 1001):
        q = backup(q, k, 1.0)
    ok = bool(exact) and abs(q - 1.0) < 1e-3
    record("backup fidelity", ok, f"exact={bool(exact)} for k <= 20; |Q_1000 - v| = {abs(q - 1.0):.2e} (need < 1e-3)")
    assert ok


def test_uct_arithmetic():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        e = EdgeStats(float(rng.uniform(-1, 1)), int(rng.integers(0, 100)), float(rng.uniform(0, 1)), float(rng.uniform(-1, 1)))
        n_parent = int(rng.integers(0, 1000))
        c1, c2 = float(rng.uniform(0.01, 5)), float(rng.uniform(0, 5))
        hand = e.Q + c1 * e.P * math.sqrt(n_parent) / (1 + e.N) + c2 * e.H
        worst = max(worst, abs(uct_score(e, n_parent, c1, c2) - hand))
    record("UCT arithmetic", worst <= 1e-12, f"max deviation {worst:.1e} over 100 edges (need <= 1e-12)")
    assert worst <= 1e-12


def test_selection_distribution():
    rng = np.random.default_rng(3)
    draws = 10_000
    worst_sigma = 0.0
    for counts in ([5, 5], [10] + [0] * 29, [7, 1, 0, 2, 12, 3] + [0] * 24):
        node = TreeNode(AircraftState(0, 0, 0, 0), 0, None, np.zeros((1, 1)))
        node.N = np.array(counts, dtype=np.int64)
        freq = np.bincount([select_action(node, rng) for _ in range(draws)], minlength=len(counts))
        p = node.N / node.N.sum()
        # actions with p in {0, 1} must be drawn exactly never or always
        degenerate = (p == 0) | (p == 1)
        assert np.array_equal(freq[degenerate], draws * p[degenerate])
        live = ~degenerate
        sigma = np.sqrt(draws * p[live] * (1 - p[live]))
        if sigma.size:
            worst_sigma = max(worst_sigma, float(np.max(np.abs(freq[live] - draws * p[live]) / sigma)))
    ok = worst_sigma <= 3.0
    record("selection distribution", ok, f"worst deviation {worst_sigma:.2f} sigma over 10,000 draws (need <= 3)")
    assert ok


def test_report_determinism(tmp_path):
    cfg = SuiteConfig(planner=PlannerConfig(budget_sims=60, max_steps=4), episodes_per_class=1, seed=5)
    deps = build_deps(cfg)
    run_suite(replace(cfg, out_dir=str(tmp_path / "a")), deps)
    run_suite(replace(cfg, out_dir=str(tmp_path / "b")), deps)
    same = (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()
    record("determinism", same, "report.json byte-identical across two runs" if same else "report.json differs")
    assert same


def test_parser_round_trip_and_errors():
    r = random.Random(99)
    failures = 0
    for _ in range(1000):
        f = random_formula(r, r.randint(1, 5))
        failures += parse_formula(print_formula(f)) != f
    positioned = 0
    for text in MALFORMED:
        try:
            parse_formula(text)
        except STLSyntaxError as err:
            positioned += err.line >= 1 and err.column >= 1
    ok = failures == 0 and positioned == len(MALFORMED) == 20
    record(
        "parser",
        ok,
        f"{1000 - failures}/1000 round trips; {positioned}/{len(MALFORMED)} malformed inputs with positioned errors",
    )
    assert ok
