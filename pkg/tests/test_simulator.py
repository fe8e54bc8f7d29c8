from dataclasses import replace

import numpy as np
import pytest

from collision_avoidance.output import summary_json, timeseries_csv
from collision_avoidance.scenario import load_scenario
from collision_avoidance.simulator import RunOptions, run, summarize

STEERING = ("front_car_high", "pedestrian_high", "oncoming")
BRAKING = ("front_car_low", "pedestrian_low")


@pytest.fixture(scope="module")
def logs():
    names = STEERING + BRAKING + ("front_car_infeasible",)
    return {n: run(load_scenario(n)) for n in names}


@pytest.mark.parametrize("name", STEERING + BRAKING)
def test_reference_fixtures_collision_free(logs, name):
    s = summarize(logs[name])
    assert not s.collision
    assert s.min_gap > 0


@pytest.mark.parametrize("name", STEERING)
def test_steering_fixtures_complete_the_maneuver(logs, name):
    log = logs[name]
    modes = [m for _, m in summarize(log).timeline]
    assert "EmergencySteer" in modes
    assert log.end_reason == "maneuver-complete"
    assert log.plan is not None and log.planner_error is None


@pytest.mark.parametrize("name", BRAKING)
def test_braking_fixtures_stop(logs, name):
    log = logs[name]
    s = summarize(log)
    assert log.end_reason == "standstill"
    assert s.final_v == 0.0 and s.final_gap > 0
    assert [m for _, m in s.timeline][1:] == ["EmergencyBrake(4)", "EmergencyBrake(7)"]


@pytest.mark.parametrize("name", STEERING + BRAKING)
def test_rows_strictly_increasing_and_no_teleporting(logs, name):
    rows = logs[name].rows
    dt = logs[name].dt
    for a, b in zip(rows, rows[1:]):
        assert b.t > a.t
        assert np.hypot(b.x - a.x, b.y - a.y) <= (a.v + 1.0) * dt + 1e-12


@pytest.mark.parametrize("name", STEERING)
def test_executed_path_respects_envelope(logs, name):
    log = logs[name]
    plan = log.plan
    env = plan.envelope
    by_k = {round(r.t / log.dt): r for r in log.rows}
    for i in range(env.N_end):
        k = plan.k_start + i * plan.substeps
        if k not in by_k:
            break
        y = plan.direction * by_k[k].y
        assert env.y_min[i] - 1e-8 <= y <= env.y_max[i] + 1e-8


@pytest.mark.parametrize("name", STEERING)
def test_plan_is_comfortable(logs, name):
    assert np.max(np.abs(logs[name].plan.trajectory.a_y)) <= 3.0


def test_infeasible_plan_falls_back_to_pre_crash_brake(logs):
    log = logs["front_car_infeasible"]
    s = summarize(log)
    assert "PreCrashBrake(7)" in [m for _, m in s.timeline]
    assert log.planner_error is not None
    spec = load_scenario("front_car_infeasible")
    base = summarize(run(replace(spec, sim=replace(spec.sim, disable_system=True))))
    assert base.collision
    assert s.impact_speed < base.impact_speed


@pytest.mark.parametrize("name", ["front_car_high", "pedestrian_low"])
def test_runs_are_deterministic(logs, name):
    again = run(load_scenario(name))
    assert timeseries_csv(again) == timeseries_csv(logs[name])
    assert summary_json(again) == summary_json(logs[name])


@pytest.mark.parametrize("name", STEERING + BRAKING)
def test_summarize_is_idempotent(logs, name):
    assert summarize(logs[name]) == summarize(logs[name])


def test_normal_throughout_has_no_lateral_motion():
    spec = load_scenario("front_car_low")
    log = run(replace(spec, sim=replace(spec.sim, disable_system=True, t_max=2.0)))
    s = summarize(log)
    assert s.timeline == ((0.0, "Normal"),)
    assert s.max_abs_ay == 0.0
    assert s.min_gap == pytest.approx(min(min(r.separations) for r in log.rows))


def test_driver_override_takes_over():
    spec = load_scenario("front_car_low")
    log = run(replace(spec, sim=replace(spec.sim, driver_override_at=1.0, t_max=3.0)))
    modes = [m for _, m in summarize(log).timeline]
    assert modes[-1] == "DriverOverride"


def test_options_must_divide():
    with pytest.raises(ValueError):
        run(load_scenario("oncoming"), RunOptions(dt=0.03, T_s=0.05))


def test_finer_planner_step_still_clears():
    log = run(load_scenario("front_car_high"), RunOptions(dt=0.005, T_s=0.05))
    assert not summarize(log).collision
