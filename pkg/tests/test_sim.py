import math

import numpy as np
import pytest

from pitchplan.obstacles import Obstacle
from pitchplan.geometry import polyline_distance
from pitchplan.sim import (COLLISION, REACHED, TIMEOUT, UNPLANNABLE, Scenario, ScenarioObstacle,
                           _make_plan, replan_reason, replan_trigger, run)

LANE = dict(start=(1.0, 4.5, 0.0), goal=(13.0, 4.5, 0.0))


def random_scenario(seed, n_max=6, mode="linear"):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(0, n_max + 1))
    S = (rng.uniform(0.5, 2.5), rng.uniform(0.5, 8.5), rng.uniform(-math.pi, math.pi))
    G = (rng.uniform(11.5, 13.5), rng.uniform(0.5, 8.5), rng.uniform(-math.pi, math.pi))
    obs = []
    while len(obs) < n:
        c = rng.uniform((3, 0.5), (11, 8.5))
        r = rng.uniform(0.2, 0.7)
        if all(math.dist(c, o.center) > r + o.radius + 0.2 for o in obs):
            obs.append(Obstacle(tuple(c), r, len(obs)))
    return Scenario(S, G, tuple(obs), noise_std=(0.01, 0.01, 0.005), seed=seed, mode=mode)


def test_empty_field_reaches_along_straight_line():
    sc = Scenario(**LANE)
    log = run(sc)
    assert log.outcome == REACHED
    p = log.true_path
    length = np.sum(np.hypot(*np.diff(p, axis=0).T))
    assert length == pytest.approx(12.0, rel=0.05)


def test_same_seed_is_bit_identical():
    sc = random_scenario(11)
    sc = Scenario(sc.start, sc.goal, sc.obstacles, noise_std=(0.03, 0.03, 0.02), seed=5)
    a, b = run(sc), run(sc)
    assert a.fingerprint() == b.fingerprint()
    assert a.rows(timing=False) == b.rows(timing=False)
    c = run(Scenario(sc.start, sc.goal, sc.obstacles, noise_std=(0.03, 0.03, 0.02), seed=6))
    assert c.fingerprint() != a.fingerprint()


def flash(appear=2.0, **kw):
    late = ScenarioObstacle(Obstacle((6.5, 4.5), 0.4, "late"), appear_time=appear)
    return Scenario(**LANE, obstacles=(late,), **kw)


def test_flash_obstacle_triggers_replan_and_avoids_it():
    sc = flash()
    log = run(sc)
    assert log.outcome == REACHED
    events = [e for e in log.replans if e.reason == "obstacle"]
    assert events and events[0].t == pytest.approx(2.0)
    wp = events[0].waypoints
    assert polyline_distance((6.5, 4.5), wp) >= 0.4 + sc.mpc.robot_radius
    d = np.hypot(*(log.true_path - (6.5, 4.5)).T)
    assert d.min() > 0.4


def test_replan_latency_within_two_ticks():
    base = run(Scenario(**LANE))
    sc = flash()
    log = run(sc)
    k_app = int(round(2.0 / sc.dt))
    diverged = [k for k, (a, b) in enumerate(zip(base.records, log.records))
                if not np.allclose(tuple(a.command), tuple(b.command), atol=1e-9)]
    assert diverged and k_app <= diverged[0] <= k_app + 2


def test_obstacle_appearing_around_robot():
    base = run(Scenario(**LANE))
    k = int(round(2.0 / 0.25))
    p = base.records[k].true_pose
    # true disk just misses the robot, the keep-out disk swallows it
    o = Obstacle((p.x, p.y + 0.65), 0.5, "ambush")
    sc = Scenario(**LANE, obstacles=(ScenarioObstacle(o, appear_time=2.0),))
    log = run(sc)
    assert log.outcome == REACHED
    slack = [float(np.max(r.slacks, initial=0.0)) for r in log.records]
    assert slack[k] > 0
    assert max(slack[k + 8:]) < 1e-6


def test_random_scenarios_never_collide():
    outcomes = [run(random_scenario(seed)).outcome for seed in range(100)]
    assert COLLISION not in outcomes
    assert outcomes.count(REACHED) == 100


def test_random_scenarios_nonlinear_never_collide():
    outcomes = [run(random_scenario(seed, mode="nonlinear")).outcome for seed in range(100, 115)]
    assert COLLISION not in outcomes


def test_walled_goal_is_unplannable():
    ring = tuple(Obstacle((11 + 1.0 * math.cos(a), 4.5 + 1.0 * math.sin(a)), 0.5, i)
                 for i, a in enumerate(np.linspace(0, 2 * math.pi, 8, endpoint=False)))
    log = run(Scenario((1.0, 4.5, 0.0), (11.0, 4.5, 0.0), ring))
    assert log.outcome == UNPLANNABLE
    assert log.replans and not log.replans[0].ok


def test_timeout():
    log = run(Scenario(**LANE, max_time=2.0))
    assert log.outcome == TIMEOUT
    assert len(log.records) == 8


def test_start_on_true_disk_is_collision():
    log = run(Scenario(**LANE, obstacles=(Obstacle((1.1, 4.5), 0.3),)))
    assert log.outcome == COLLISION


def test_start_outside_field_rejected():
    with pytest.raises(ValueError):
        Scenario((-1, 0, 0), (5, 5, 0))


class TestTrigger:
    sc = Scenario(**LANE)

    def active(self):
        ap, _ = _make_plan(self.sc.start, [], self.sc, 0, 0.0)
        return ap

    def test_initial(self):
        assert replan_reason(self.sc.start, None, [], 0.0, self.sc) == "initial"

    def test_unchanged_world_waits_for_timer(self):
        ap = self.active()
        on_path = (2.0, 4.5, 0.0)
        assert not replan_trigger(on_path, ap, [], 0.5, self.sc)
        assert not replan_trigger(on_path, ap, [], 0.75, self.sc)
        assert replan_reason(on_path, ap, [], 1.0, self.sc) == "periodic"

    def test_new_disk_on_remaining_path(self):
        ap = self.active()
        assert replan_reason((2.0, 4.5, 0.0), ap, [Obstacle((8, 4.7), 0.3)], 0.5, self.sc) == "obstacle"

    def test_disk_behind_robot_is_ignored(self):
        ap = self.active()
        assert not replan_trigger((2.2, 4.5, 0.0), ap, [Obstacle((1.0, 4.5), 0.3)], 0.75, self.sc)

    def test_pushed_off_path(self):
        ap = self.active()
        assert replan_reason((2.0, 5.5, 0.0), ap, [], 0.5, self.sc) == "off_track"

    def test_known_obstacle_does_not_retrigger(self):
        o = Obstacle((6, 6.0), 0.5, "a")
        ap, _ = _make_plan(self.sc.start, [o], self.sc, 0, 0.0)
        assert not replan_trigger((2.0, 4.5, 0.0), ap, [o], 0.5, self.sc)


def test_moving_obstacle_scenario_is_deterministic():
    mover = ScenarioObstacle(Obstacle((7.0, 7.5), 0.4, "m"), velocity=(0.0, -0.5))
    sc = Scenario(**LANE, obstacles=(mover,), mode="nonlinear", noise_std=(0.01, 0.01, 0.01), seed=3)
    a, b = run(sc), run(sc)
    assert a.fingerprint() == b.fingerprint()
    assert a.outcome != COLLISION


def test_csv_layout(tmp_path):
    log = run(Scenario(**LANE, max_time=1.0))
    log.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0].split(",") == list(log.CSV_COLUMNS)
    assert len(lines) == len(log.records) + 1
