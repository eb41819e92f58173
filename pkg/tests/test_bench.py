import json
import math
import re

import numpy as np
import pytest

from kiteplan import cli, edge_bundle as eb
from kiteplan import mrmp as M
from kiteplan import planner as P
from kiteplan.bench import runner as R
from kiteplan.bench.experiments import compare_pruning, ct_ratio, skip_ablation
from kiteplan.bench.plot import emit_plot, render_svg
from kiteplan.bench.scenario import (TEMPLATES, Scenario, ScenarioError, check_scenario,
                                     generate_scenario, load_scenario, save_scenario)
from kiteplan.bench.validate import validate_solution
from kiteplan.dynamics import DOUBLE_INTEGRATOR, UNICYCLE, SystemId, propagate_steps
from kiteplan.geometry import Footprint, GoalRegion, Workspace, static_collides

SYSTEM_FOR = {"Swap2D": "UC", "Swap3D": "DI", "NarrowCorridor": "SOC", "SmallCluttered": "SOC",
              "LargeCluttered": "UC", "LargeCluttered3D": "DI"}


# ------------------------------------------------------------------ scenarios


@pytest.mark.parametrize("template", TEMPLATES)
def test_templates_are_deterministic_and_valid(template, tmp_path):
    sysid = SYSTEM_FOR[template]
    n = 2 if template == "NarrowCorridor" else 6
    a = generate_scenario(template, sysid, n, seed=3)
    b = generate_scenario(template, sysid, n, seed=3)
    assert a == b and a.to_dict() == b.to_dict()
    assert generate_scenario(template, sysid, n, seed=4).to_dict() != a.to_dict() or not a.obstacles
    check_scenario(a)
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_scenario(a, p1)
    save_scenario(b, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert load_scenario(p1) == a
    inst = a.to_instance()
    inst.check()
    for ag in a.agents:
        probe = np.zeros(3)
        probe[: len(ag.goal)] = ag.goal
        point = Footprint.sphere(1e-9) if len(ag.goal) == 3 else Footprint.circle(1e-9)
        assert not static_collides(point, probe, inst.workspace)


def test_swap2d_is_antipodal_and_clear():
    sc = generate_scenario("Swap2D", "UC", 4, seed=1)
    assert sc.lo == [0.0, 0.0] and sc.hi == [20.0, 20.0]
    starts = [np.array(a.start[:2]) for a in sc.agents]
    centre = np.array([10.0, 10.0])
    for a in sc.agents:
        np.testing.assert_allclose(np.array(a.goal) - centre, -(np.array(a.start[:2]) - centre), atol=1e-12)
    for i in range(4):
        for j in range(i + 1, 4):
            assert np.linalg.norm(starts[i] - starts[j]) > 0.8


def test_cluttered_bounds_match_the_named_sizes():
    assert generate_scenario("SmallCluttered", "SOC", 4, 0).hi == [15.0, 15.0]
    assert generate_scenario("LargeCluttered", "UC", 4, 0).hi == [40.0, 40.0]
    assert generate_scenario("LargeCluttered3D", "DI", 4, 0).hi == [14.0, 14.0, 10.0]
    assert generate_scenario("NarrowCorridor", "UC", 2, 0).hi == [5.0, 4.0]


def test_narrow_corridor_goal_radius():
    sc = generate_scenario("NarrowCorridor", "SOC", 2, 0)
    assert all(a.goal_radius == 0.25 for a in sc.agents)
    assert len(sc.obstacles) == 2


def test_scenario_errors():
    with pytest.raises(ScenarioError):
        generate_scenario("Swap3D", "UC", 4)
    with pytest.raises(ScenarioError):
        generate_scenario("Swap2D", "DI", 4)
    with pytest.raises(ScenarioError):
        generate_scenario("Maze", "UC", 4)
    with pytest.raises(ScenarioError):
        generate_scenario("Swap2D", "UC", 0)
    with pytest.raises(ScenarioError):
        generate_scenario("NarrowCorridor", "UC", 40)
    sc = generate_scenario("Swap2D", "UC", 2, 0)
    sc.agents[1].start = list(sc.agents[0].start)
    with pytest.raises(ScenarioError):
        check_scenario(sc)
    with pytest.raises(ValueError):
        Scenario.from_dict(dict(sc.to_dict(), version=2))


# ------------------------------------------------------------------ validator


def _line(model, start, u, n):
    seg = propagate_steps(model, start, u, n)
    return P.Trajectory(np.asarray(start, dtype=float), [seg], model.dt)


def test_validator_accepts_a_hand_built_solution():
    inst = M.ProblemInstance(UNICYCLE, Workspace([0, 0], [20, 20]), [Footprint.circle(0.4)],
                             [[5.0, 5.0, 0.0]], [GoalRegion((6.0, 5.0), 0.5)])
    sol = M.Solution([_line(UNICYCLE, [5.0, 5.0, 0.0], [0.5, 0.0], 20)])
    rep = validate_solution(inst, sol)
    assert rep.ok, rep.summary()


def test_validator_flags_a_perturbed_state():
    inst = M.ProblemInstance(UNICYCLE, Workspace([0, 0], [20, 20]),
                             [Footprint.circle(0.4)], [[5.0, 5.0, 0.0]],
                             [GoalRegion((6.0, 5.0), 0.5)])
    tr = _line(UNICYCLE, [5.0, 5.0, 0.0], [0.5, 0.0], 20)
    tr.segments[0].states[7, 1] += 1e-3
    rep = validate_solution(inst, M.Solution([tr]))
    dyn = [v for v in rep.violations if v.kind == "dynamics"]
    # both the transition into and out of the tampered sample are inconsistent
    assert [v.step for v in dyn] == [7, 8]
    assert dyn[0].time == pytest.approx(0.7)


def test_validator_reports_pairwise_overlap_time():
    # two DI spheres close at 1 m/s from 0.95 m apart, centres coincide at t = 0.95
    fp = Footprint.sphere(0.1)
    ws = Workspace([0, 0, 0], [10, 10, 10])
    a = _line(DOUBLE_INTEGRATOR, [4.525, 5, 5, 0.5, 0, 0], [0, 0, 0], 20)
    b = _line(DOUBLE_INTEGRATOR, [5.475, 5, 5, -0.5, 0, 0], [0, 0, 0], 20)
    inst = M.ProblemInstance(DOUBLE_INTEGRATOR, ws, [fp, fp], [a.start, b.start],
                             [GoalRegion((5.5, 5, 5), 0.5), GoalRegion((4.5, 5, 5), 0.5)])
    rep = validate_solution(inst, M.Solution([a, b]))
    pair = [v for v in rep.violations if v.kind == "pairwise"]
    assert pair and (pair[0].agent, pair[0].other) == (0, 1)
    # centres closer than 0.2 for 0.75 < t < 1.15: steps 8 to 11, clear of the tangent samples
    assert [v.step for v in pair] == [8, 9, 10, 11]
    c = M.detect_first_conflict([a, b], [fp, fp])
    assert (c.k_start, c.k_end) == (8, 11) and c.t_end > c.t_start


def test_validator_flags_bounds_goal_and_start():
    inst = M.ProblemInstance(UNICYCLE, Workspace([0, 0], [10, 10], [([7, 4], [8, 6])]),
                             [Footprint.circle(0.4)], [[5.0, 5.0, 0.0]],
                             [GoalRegion((2.0, 2.0), 0.5)])
    # begins off the declared start, then runs into the box at x = 7
    tr = _line(UNICYCLE, [5.0, 5.05, 0.0], [0.5, 0.0], 40)
    tr.segments[0].control[:] = [0.7, 0.0]
    kinds = validate_solution(inst, M.Solution([tr])).kinds()
    assert kinds == {"start", "control_bounds", "goal", "static", "dynamics"}
    rep = validate_solution(inst, M.Solution([]))
    assert rep.kinds() == {"timing"}


# ------------------------------------------------------------------ runner


def test_mean_stderr():
    assert R.mean_stderr([]) == (None, None)
    assert R.mean_stderr([2.0]) == (2.0, 0.0)
    m, se = R.mean_stderr([1.0, 2.0, 3.0, 4.0])
    assert m == 2.5 and se == pytest.approx(math.sqrt(5 / 3) / 2)


def test_fmt_num():
    assert [R.fmt_num(x) for x in (None, 0, 0.0479, 0.479, 2.17, 11.7, 116.4, 1234.5)] == \
        ["-", "0.0", "0.0479", "0.479", "2.17", "11.7", "116", "1234"]


def test_all_failures_render_dashes():
    rec = R.ResultsRecord("X", {"planner": "KCBS", "variant": "Base"},
                          [R.TrialRecord(s, False, "timeout", 1.0, None, 10) for s in range(3)])
    agg = rec.aggregate()
    assert agg["sr"] == 0.0 and agg["ct_mean"] is None and agg["pt_mean"] is None
    assert "| X | Base | 0 | - | - |" in R.render_table([rec])


def test_config_errors():
    with pytest.raises(ValueError):
        R.RunConfig(planner="X")
    with pytest.raises(ValueError):
        R.RunConfig(variant="Y")
    with pytest.raises(ValueError):
        R.RunConfig(planner="pRRT", pruning=True)
    sc = generate_scenario("Swap2D", "UC", 2, 0)
    with pytest.raises(ValueError):
        R.run_campaign(sc, R.RunConfig(variant="KiTE", seeds=[0]))


def test_campaign_is_seed_deterministic_and_round_trips(tmp_path):
    sc = generate_scenario("Swap2D", "UC", 2, seed=5)
    rc = R.RunConfig(planner="pRRT", variant="Base", seeds=[3, 1, 2], budget=30)
    jl = tmp_path / "t.jsonl"
    a = R.run_campaign(sc, rc, jsonl_path=jl)
    b = R.run_campaign(sc, rc)
    strip = lambda rec: [dict(vars(t), ct=None) for t in rec.trials]  # noqa: E731
    assert strip(a) == strip(b)
    assert [t.seed for t in a.trials] == [3, 1, 2]
    assert all(t.valid for t in a.trials if t.success)
    lines = jl.read_text().splitlines()
    assert len(lines) == 3 and json.loads(lines[0])["run"] == "pRRT+Base"
    path = tmp_path / "r.json"
    R.save_results(a, path)
    back = R.load_results(path)
    assert back.to_dict() == a.to_dict()
    assert json.loads(path.read_text())["aggregate"]["trials"] == 3


def test_recorded_path_time_matches_the_solution_file(tmp_path):
    sc = generate_scenario("Swap2D", "UC", 3, seed=2)
    rc = R.RunConfig(planner="KCBS", variant="Base", seeds=[0], budget=60)
    sols = {}
    rec = R.run_trial(sc, rc, 0, solution_sink=lambda s, sol: sols.setdefault(s, sol))
    assert rec.success
    M.save_solution(sols[0], UNICYCLE, tmp_path / "s.json")
    back = M.load_solution(tmp_path / "s.json")
    assert sum(t.duration for t in back.trajectories) == pytest.approx(rec.pt, abs=1e-12)
    assert back.path_time == rec.pt


def test_parallel_campaign_matches_serial(small_bundles):
    sc = generate_scenario("Swap2D", "UC", 2, seed=5)
    rc = R.RunConfig(planner="cRRT", variant="KiTE", seeds=[0, 1, 2, 3], budget=30)
    b = small_bundles[SystemId.UC]
    serial = R.run_campaign(sc, rc, b, workers=1)
    par = R.run_campaign(sc, rc, b, workers=2)
    key = lambda rec: [(t.seed, t.success, t.pt, t.iterations) for t in rec.trials]  # noqa: E731
    assert key(serial) == key(par)


def test_worker_env(monkeypatch):
    monkeypatch.setenv(R.WORKERS_ENV, "3")
    assert R.worker_count() == 3
    monkeypatch.setenv(R.WORKERS_ENV, "0")
    with pytest.raises(ValueError):
        R.worker_count()
    monkeypatch.delenv(R.WORKERS_ENV)
    assert R.worker_count(2) == 2


def test_ablation_and_pruning_helpers(small_bundles):
    sc = generate_scenario("Swap2D", "SOC", 2, seed=1)
    b = small_bundles[SystemId.SOC]
    table, raw = skip_ablation(sc, ["pRRT"], [5, 25], [0, 1], b, budget=30, workers=1)
    assert table["parameter"] == "Skip factor p" and [r["setting"] for r in table["rows"]] == [5, 25]
    assert table["planners"] == ["pRRT+KiTE"]
    text = R.render_ablation(table)
    assert text.splitlines()[0].startswith("| Skip factor p | pRRT+KiTE Rounds |")
    pr = compare_pruning(sc, [0], b, budget=30, workers=1)
    assert set(pr) == {"on", "off"}
    assert ct_ratio(pr["on"], pr["off"]) is None or ct_ratio(pr["on"], pr["off"]) > 0


# ------------------------------------------------------------------ plots


def test_plot_is_deterministic_with_one_polyline_per_agent(tmp_path):
    sc = generate_scenario("SmallCluttered", "UC", 3, seed=0)
    res = M.prrt_plan(sc.to_instance(), rng=np.random.default_rng(0), config=P.PlannerConfig(budget=60))
    assert res.success
    p1, p2 = tmp_path / "a.svg", tmp_path / "b.svg"
    emit_plot(sc, res.solution, p1)
    emit_plot(sc, res.solution, p2)
    text = p1.read_text()
    assert p1.read_bytes() == p2.read_bytes()
    assert text.count('class="trajectory"') == 3
    assert text.count('class="obstacle"') == len(sc.obstacles)
    assert text.count('class="goal"') == 3 and text.count('class="start"') == 3


def test_plot_without_obstacles_or_solution():
    sc = generate_scenario("Swap2D", "UC", 2, seed=0)
    text = render_svg(sc, None)
    assert 'class="obstacle"' not in text and 'class="trajectory"' not in text
    assert 'class="bounds"' in text and text.count('class="goal"') == 2


def test_plot_3d_uses_a_projection():
    sc = generate_scenario("LargeCluttered3D", "DI", 2, seed=0)
    text = render_svg(sc, None)
    assert text.count('class="bounds"') == 12  # cube edges
    assert text.count('class="obstacle"') == len(sc.obstacles)


def test_plot_unwritable_path():
    sc = generate_scenario("Swap2D", "UC", 1, seed=0)
    with pytest.raises(OSError):
        emit_plot(sc, None, "/nonexistent-dir/x.svg")


# ------------------------------------------------------------------ CLI


def test_cli_end_to_end(tmp_path, capsys):
    bpath, spath = tmp_path / "uc.bin", tmp_path / "sc.json"
    assert cli.main(["bundle", "generate", "--system", "UC", "--size", "3000", "--seed", "2",
                     "-o", str(bpath)]) == 0
    assert bpath.stat().st_size == eb.HEADER_SIZE + 3000 * 52
    capsys.readouterr()
    assert cli.main(["bundle", "info", str(bpath), "--verify"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["edges"] == 3000 and info["failed_edges"] == 0 and info["system"] == "UC"

    assert cli.main(["scenario", "generate", "--template", "Swap2D", "--system", "UC", "-N", "2",
                     "--seed", "1", "-o", str(spath)]) == 0
    sol, svg = tmp_path / "sol.json", tmp_path / "p.svg"
    assert cli.main(["plan", "--scenario", str(spath), "--planner", "pRRT", "--bundle", str(bpath),
                     "--budget", "30", "-o", str(sol), "--plot", str(svg)]) == 0
    assert svg.read_text().count("<polyline") == 2
    meta = json.loads(sol.read_text())["metadata"]
    assert meta["seed"] == 0 and meta["config"]["planner"] == "pRRT"
    capsys.readouterr()
    assert cli.main(["validate", "--scenario", str(spath), "--solution", str(sol)]) == 0

    data = json.loads(sol.read_text())
    data["agents"][0]["states"][3][0] += 0.01
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    assert cli.main(["validate", "--scenario", str(spath), "--solution", str(bad)]) == 1

    res = tmp_path / "res.json"
    assert cli.main(["bench", "--scenario", str(spath), "--planner", "KCBS", "--variant", "Base",
                     "--trials", "2", "--budget", "30", "--workers", "1", "-o", str(res),
                     "--jsonl", str(tmp_path / "t.jsonl")]) == 0
    capsys.readouterr()
    assert cli.main(["report", str(res)]) == 0
    out = capsys.readouterr().out
    assert re.search(r"\| Swap2D-UC-N2-s1 \| Base \| 100 \| [0-9.]+ ± [0-9.]+ \|", out)


def test_cli_rejects_mismatched_bundles(tmp_path, small_bundles):
    bpath, spath = tmp_path / "soc.bin", tmp_path / "sc.json"
    eb.save(small_bundles[SystemId.SOC], bpath)
    cli.main(["scenario", "generate", "--template", "Swap2D", "--system", "UC", "-N", "2", "-o", str(spath)])
    with pytest.raises(eb.BundleFormatError):
        cli.main(["plan", "--scenario", str(spath), "--bundle", str(bpath)])
    with pytest.raises(SystemExit):
        cli.main(["plan", "--scenario", str(spath)])
    with pytest.raises(SystemExit):
        cli.main(["plan", "--scenario", str(spath), "--variant", "Base", "--bundle", str(bpath)])


def test_cli_report_ablation(tmp_path, capsys):
    table = {"format": "kiteplan.ablation", "version": 1, "parameter": "Skip factor p",
             "planners": ["KCBS+KiTE"],
             "rows": [{"setting": 5, "KCBS+KiTE": {"rounds": 3, "ct_mean": 0.5, "ct_stderr": 0.01,
                                                   "pt_mean": 80.0, "pt_stderr": 2.0}}]}
    path = tmp_path / "abl.json"
    path.write_text(json.dumps(table))
    assert cli.main(["report", "--ablation", str(path)]) == 0
    assert "| 5 | 3 | 0.500 ± 0.0100 | 80.0 ± 2.00 |" in capsys.readouterr().out
