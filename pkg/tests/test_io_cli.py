import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from pitchplan import cli
from pitchplan.bench import davg_suite, mpc_suite, random_layout
from pitchplan.davg import plan
from pitchplan.io import (ScenarioError, load_scenario, parse_scenario, read_waypoints_csv,
                          scenario_from_dict, scenario_to_dict, write_waypoints_csv)
from pitchplan.obstacles import polygonize

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def minimal(**extra):
    doc = {"version": 1, "start": {"x": 1, "y": 1, "theta": 0}, "goal": {"x": 5, "y": 1, "theta": 0}}
    doc.update(extra)
    return doc


def write(tmp_path, doc, name="s.json"):
    p = tmp_path / name
    p.write_text(doc if isinstance(doc, str) else json.dumps(doc))
    return p


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_bundled_scenarios_load():
    for p in SCENARIOS.glob("*.json"):
        load_scenario(p)


def test_json_syntax_error_names_line_and_column():
    text = '{\n  "version": 1,\n  "start": {"x": 1 "y": 2}\n}'
    with pytest.raises(ScenarioError, match=r"s\.json:3:\d+:"):
        parse_scenario(text, "s.json")


@pytest.mark.parametrize("doc, where", [
    (minimal(version=2), ".version"),
    (minimal(obstacles=[{"x": 1, "y": 2, "radius": -1}]), ".obstacles[0].radius"),
    (minimal(colour="red"), "(root)"),
    ({"version": 1, "start": {"x": 1, "y": 1}}, "(root)"),
    (minimal(tracker={"mode": "quadratic"}), ".tracker.mode"),
])
def test_schema_errors_name_the_field(doc, where):
    with pytest.raises(ScenarioError) as err:
        scenario_from_dict(doc, "x.json")
    assert f"x.json: {where}:" in str(err.value)


def test_snapshot_round_trip():
    sc = load_scenario(SCENARIOS / "flash.json")
    again = scenario_from_dict(scenario_to_dict(sc))
    assert scenario_to_dict(again) == scenario_to_dict(sc)


def test_waypoint_csv_is_exact(tmp_path):
    wp = np.array([(0.1, 1 / 3), (math.pi, -2e-17)])
    write_waypoints_csv(tmp_path / "w.csv", wp)
    assert np.array_equal(read_waypoints_csv(tmp_path / "w.csv"), wp)


def run_cli(*args):
    return cli.main([str(a) for a in args])


def assert_manifest(out, command, code):
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == command and man["exit_code"] == code
    assert man["version"]
    return man


def test_plan_empty_field(tmp_path, capsys):
    s = write(tmp_path, minimal())
    out = tmp_path / "out"
    assert run_cli("plan", "--scenario", s, "--out", out) == cli.EXIT_OK
    rows = read_csv(out / "waypoints.csv")
    assert rows == [["x", "y"], ["1.0", "1.0"], ["5.0", "1.0"]]
    assert (out / "config.json").exists() and (out / "plan.svg").exists()
    man = assert_manifest(out, "plan", 0)
    assert man["result"]["distance"] == pytest.approx(4.0)
    assert "cost 4.0000" in capsys.readouterr().out


def test_plan_six_defenders_writes_figure_and_avoids_polygons(tmp_path):
    out = tmp_path / "out"
    assert run_cli("plan", "--scenario", SCENARIOS / "six_defenders.json", "--out", out) == 0
    svg = (out / "plan.svg").read_text()
    assert svg.startswith("<svg") and svg.count("<circle") >= 6
    wp = read_waypoints_csv(out / "waypoints.csv")
    assert len(wp) >= 3
    nodes = read_csv(out / "graph_nodes.csv")
    assert len(nodes) > 2


def test_plan_goal_inside_obstacle_ends_through_vertex(tmp_path):
    doc = minimal(obstacles=[{"x": 5.1, "y": 1.1, "radius": 0.3}])
    out = tmp_path / "out"
    assert run_cli("plan", "--scenario", write(tmp_path, doc), "--out", out) == 0
    wp = read_waypoints_csv(out / "waypoints.csv")
    assert tuple(wp[-1]) == (5.0, 1.0)
    sc = load_scenario(tmp_path / "s.json")
    o = sc.obstacles_at(0)[0].inflated(sc.mpc.robot_radius + sc.plan_margin)
    verts = polygonize(o, sc.planner.n_sides).vertices
    assert np.min(np.hypot(*(verts - wp[-2]).T)) < 1e-9


def test_plan_round_trip_through_files(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert run_cli("plan", "--scenario", SCENARIOS / "six_defenders.json", "--out", out1) == 0
    # re-ingest the config snapshot and plan again
    assert run_cli("plan", "--scenario", out1 / "config.json", "--out", out2) == 0
    assert (out1 / "waypoints.csv").read_bytes() == (out2 / "waypoints.csv").read_bytes()
    sc = load_scenario(out1 / "config.json")
    obs = [o.inflated(sc.mpc.robot_radius + sc.plan_margin) for o in sc.obstacles_at(0)]
    again = plan(sc.start, sc.goal, obs, sc.planner).as_array()
    assert np.array_equal(again, read_waypoints_csv(out1 / "waypoints.csv"))


def test_plan_walled_goal_exits_two(tmp_path):
    out = tmp_path / "out"
    assert run_cli("plan", "--scenario", SCENARIOS / "walled.json", "--out", out) == cli.EXIT_UNPLANNABLE
    assert_manifest(out, "plan", 2)


def test_malformed_scenario_exits_one(tmp_path, capsys):
    s = write(tmp_path, '{"version": 1,,}')
    out = tmp_path / "out"
    assert run_cli("plan", "--scenario", s, "--out", out) == cli.EXIT_INPUT
    assert "s.json:1:" in capsys.readouterr().err
    assert_manifest(out, "plan", 1)


def test_missing_file_exits_one(tmp_path):
    assert run_cli("sim", "--scenario", tmp_path / "nope.json", "--out", tmp_path / "o") == 1


@pytest.mark.parametrize("args", [
    ["plan"], ["fly", "--out", "x"], ["sim", "--scenario", "s.json", "--out", "o", "--mode", "fuzzy"],
    ["sim", "--scenario", "s.json", "--out", "o", "--horizon", "0"],
    ["plan", "--scenario", "s.json", "--out", "o", "--n-sides", "2"],
    ["plan", "--scenario", "s.json", "--out", "o", "--lambda", "-1"],
])
def test_bad_arguments_exit_one(args, capsys):
    assert cli.main(args) == cli.EXIT_INPUT


def test_sim_flash_scenario_reaches_with_replan(tmp_path):
    out = tmp_path / "out"
    assert run_cli("sim", "--scenario", SCENARIOS / "flash.json", "--out", out) == 0
    man = assert_manifest(out, "sim", 0)
    assert man["result"]["outcome"] == "reached"
    reasons = [r[2] for r in read_csv(out / "replans.csv")[1:]]
    assert "obstacle" in reasons
    svg = (out / "sim.svg").read_text()
    assert "#1f5fff" in svg and "#e02020" in svg
    header = read_csv(out / "simlog.csv")[0]
    assert header[:4] == ["t", "x", "y", "theta"]


def test_sim_six_defenders_reaches(tmp_path):
    assert run_cli("sim", "--scenario", SCENARIOS / "six_defenders.json", "--out", tmp_path / "o") == 0


def test_sim_walled_exits_nonzero_and_records_outcome(tmp_path):
    out = tmp_path / "out"
    code = run_cli("sim", "--scenario", SCENARIOS / "walled.json", "--out", out)
    assert code != 0
    man = assert_manifest(out, "sim", code)
    assert man["result"]["outcome"] == "unplannable"


def test_overrides_recorded(tmp_path):
    out = tmp_path / "out"
    run_cli("sim", "--scenario", SCENARIOS / "empty.json", "--out", out, "--seed", 9, "--mode", "nonlinear",
            "--horizon", 6, "--lambda", 0.5)
    man = json.loads((out / "manifest.json").read_text())
    assert man["overrides"] == {"seed": 9, "mode": "nonlinear", "horizon": 6, "turn_weight": 0.5}
    cfg = json.loads((out / "config.json").read_text())
    assert cfg["seed"] == 9 and cfg["tracker"]["mode"] == "nonlinear" and cfg["tracker"]["horizon"] == 6
    assert cfg["planner"]["turn_weight"] == 0.5


def test_sim_seed_reproducible_through_cli(tmp_path):
    for name in ("a", "b"):
        assert run_cli("sim", "--scenario", SCENARIOS / "flash.json", "--out", tmp_path / name, "--seed", 3) == 0
    fp = [json.loads((tmp_path / n / "manifest.json").read_text())["result"]["fingerprint"] for n in "ab"]
    assert fp[0] == fp[1]


def test_bench_grids():
    davg = davg_suite(repetitions=2, seed=1)
    assert [(r.n_obs, r.param) for r in davg] == [(n, s) for n in (2, 4, 6, 8) for s in (4, 10)]
    lmpc = mpc_suite("linear", repetitions=1, seed=1, ticks=4)
    assert [r.param for r in lmpc] == [5, 10, 15, 20]
    assert all(r.n_obs == 2 for r in lmpc)


def test_bench_single_sample_p95_is_the_sample():
    rows = davg_suite(repetitions=1, seed=2, obstacles=(2,), sides=(4,))
    assert rows[0].samples == 1
    assert rows[0].p95_ms == rows[0].median_ms == rows[0].mean_ms


def test_bench_layouts_are_seeded():
    a = random_layout(np.random.default_rng(4), 6)
    b = random_layout(np.random.default_rng(4), 6)
    assert repr(a) == repr(b)


def test_bench_cli_writes_table(tmp_path, capsys):
    out = tmp_path / "out"
    assert run_cli("bench", "--suite", "davg", "--repetitions", 1, "--out", out) == 0
    rows = read_csv(out / "bench.csv")
    assert rows[0] == ["suite", "n_obs", "param", "mean_ms", "median_ms", "p95_ms", "samples"]
    assert len(rows) == 9
    assert_manifest(out, "bench", 0)
    assert "mean ms" in capsys.readouterr().out
