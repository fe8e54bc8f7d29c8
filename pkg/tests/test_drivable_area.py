import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from collision_avoidance.drivable_area import (
    EgoGeometry,
    ObstacleSnapshot,
    build_envelope,
    collision_hazard_time,
    envelope_from_indices,
    hazard_timing,
    lateral_clearance,
    predicted_face,
)
from collision_avoidance.errors import InfeasibleError, NoConflict
from collision_avoidance.oracles import hazard_time_by_integration

GEOM = EgoGeometry()

# frozen from 0.1 ms fixed-step kinematic integration to face coincidence
HAZARD = [
    ((25.0, 16.7, -7.0, 26.0), 1.7865726782),
    ((16.7, -16.7, 0.0, 66.7), 1.997005988),
    ((22.2, 0.0, 0.0, 29.7), 1.3378378378),
    ((20.0, 0.0, 0.0, 40.0), 2.0),
    ((20.0, 15.0, -3.0, 10.0), 1.40651482),
    ((30.0, 10.0, -8.0, 20.0), 0.85410197),
]


@pytest.mark.parametrize("args, expected", HAZARD)
def test_hazard_time_frozen(args, expected):
    assert collision_hazard_time(*args) == pytest.approx(expected, abs=1e-6)


@pytest.mark.parametrize("args, expected", HAZARD)
def test_integration_oracle_frozen(args, expected):
    assert hazard_time_by_integration(*args) == pytest.approx(expected, abs=2e-4)


def test_hazard_time_no_conflict():
    with pytest.raises(NoConflict):
        collision_hazard_time(10.0, 12.0, 0.0, 5.0)
    with pytest.raises(ValueError):
        collision_hazard_time(0.0, 0.0, 0.0, 5.0)
    with pytest.raises(ValueError):
        collision_hazard_time(10.0, 0.0, 0.0, 0.0)


@given(
    v_ego=st.floats(1.0, 40.0),
    v_obj=st.floats(-30.0, 40.0),
    a_obj=st.floats(-9.0, 0.0),
    L=st.floats(1.0, 120.0),
)
@settings(max_examples=40)
def test_hazard_time_matches_integration(v_ego, v_obj, a_obj, L):
    # accelerating obstacles use the current closing speed by design, so
    # only constant-speed and braking obstacles are compared to integration
    try:
        t = collision_hazard_time(v_ego, v_obj, a_obj, L)
    except NoConflict:
        return
    assume(t < 20.0)
    ref = hazard_time_by_integration(v_ego, v_obj, a_obj, L, dt=1e-3)
    assert abs(t - ref) <= 2e-3


@pytest.mark.parametrize("v_x, expected", [(25.0, 1.048), (16.7, 1.052)])
def test_lateral_clearance_examples(v_x, expected):
    assert lateral_clearance(GEOM, v_x) == pytest.approx(expected, abs=5e-4)


def test_lateral_clearance_without_lateral_speed():
    g = EgoGeometry(v_y_max=0.0)
    assert lateral_clearance(g, 10.0) == pytest.approx(1.1 * 1.9 / 2)
    with pytest.raises(ValueError):
        lateral_clearance(g, 0.0)


def test_envelope_from_indices_example():
    y_min, y_max = envelope_from_indices(30, 40, 70, 3.5, 2.0, 0.2)
    expected = np.array([0.0] * 30 + [2.0] * 10 + [0.0] * 29 + [3.3])
    np.testing.assert_array_equal(y_min, expected)
    np.testing.assert_array_equal(y_max, np.full(70, 3.7))


def test_envelope_from_indices_rejects_bad_order():
    with pytest.raises(ValueError):
        envelope_from_indices(10, 5, 20, 3.5, 2.0, 0.2)
    with pytest.raises(ValueError):
        envelope_from_indices(5, 20, 20, 3.5, 2.0, 0.2)


def test_zero_merge_margin_keeps_one_terminal_step():
    obs = ObstacleSnapshot(gap=40.0, length=4.5, width=1.9)
    tm = hazard_timing(obs, 20.0, GEOM, 0.05, 0.0)
    assert tm.N_end == tm.N_obj2 + 1


def test_front_car_envelope():
    obs = ObstacleSnapshot(gap=26.0, length=4.5, width=1.9, v=16.7, a=-7.0)
    env, tm = build_envelope(obs, 25.0, GEOM)
    assert tm.N_obj1 == math.floor(tm.t_haz_near / 0.05)
    assert tm.N_obj1 <= tm.N_obj2 < tm.N_end
    assert env.y_min[tm.N_obj1] == pytest.approx(0.95 + 1.048, abs=1e-3)
    assert env.y_min[-1] == pytest.approx(3.3)
    assert np.all(env.y_max == pytest.approx(3.7))


def test_pedestrian_prediction_moves_toward_ego_lane():
    ped = ObstacleSnapshot(gap=29.7, length=0.4, width=0.6, y=-2.0, v_lat=1.4)
    assert predicted_face(ped, 1.34) == pytest.approx(-2.0 + 1.4 * 1.34 + 0.3)
    env, tm = build_envelope(ped, 22.2, GEOM, direction=1)
    # the far-face time is later, so the pedestrian has walked further
    assert env.W_obj == pytest.approx(predicted_face(ped, tm.t_haz_far))


def test_mirrored_direction():
    obs = ObstacleSnapshot(gap=60.0, length=4.5, width=1.9, v=-16.7, y=1.0)
    assert predicted_face(obs, 0.0, direction=-1) == pytest.approx(-1.0 + 0.95)


def test_imminent_hazard_is_infeasible():
    obs = ObstacleSnapshot(gap=1.0, length=4.5, width=1.9)
    with pytest.raises(InfeasibleError):
        build_envelope(obs, 25.0, GEOM)


def test_slow_lateral_speed_is_infeasible():
    obs = ObstacleSnapshot(gap=26.0, length=4.5, width=1.9, v=16.7, a=-7.0)
    with pytest.raises(InfeasibleError):
        build_envelope(obs, 25.0, EgoGeometry(v_y_max=0.3))


def test_stationary_prediction_matches_static_envelope():
    obs = ObstacleSnapshot(gap=50.0, length=4.5, width=1.9)
    env, tm = build_envelope(obs, 20.0, GEOM)
    y_min, _ = envelope_from_indices(tm.N_obj1, tm.N_obj2, tm.N_end, 3.5, 0.95 + env.d_lat, 0.2)
    np.testing.assert_allclose(env.y_min, y_min)


@given(
    v_ego=st.floats(5.0, 35.0),
    gap=st.floats(5.0, 100.0),
    v_obj=st.floats(0.0, 30.0),
    length=st.floats(0.3, 6.0),
    width=st.floats(0.3, 2.5),
    y=st.floats(-4.0, 1.0),
    v_lat=st.floats(-1.5, 1.5),
)
def test_envelope_invariants(v_ego, gap, v_obj, length, width, y, v_lat):
    obs = ObstacleSnapshot(gap=gap, length=length, width=width, v=v_obj, y=y, v_lat=v_lat)
    try:
        env, tm = build_envelope(obs, v_ego, GEOM)
    except (InfeasibleError, NoConflict):
        return
    assert 0 < tm.t_haz_near <= tm.t_haz_far
    assert tm.N_obj1 <= tm.N_obj2 < tm.N_end
    assert np.all(env.y_min <= env.y_max)
    assert np.all(env.y_max <= env.W + env.delta_y + 1e-12)
    assert env.y_min[-1] == pytest.approx(env.W - env.delta_y)
    assert np.all(env.y_min[tm.N_obj1:tm.N_obj2] >= env.W_obj + env.d_lat - 1e-12)
    # witness at the lateral speed cap stays inside
    k = np.arange(env.N_end)
    w = np.minimum(GEOM.v_y_max * env.T_s * k, env.W)
    assert np.all(w >= env.y_min - 1e-9) and np.all(w <= env.y_max + 1e-9)


@given(y_rear=st.floats(0.0, 3.7), heading=st.floats(-1.0, 1.0), v_x=st.floats(5.0, 35.0), face=st.floats(-2.0, 1.5))
def test_clearance_keeps_body_edge_off_the_face(y_rear, heading, v_x, face):
    # rear-axle midpoint at least d above the face, |heading| <= theta_max:
    # the near body edge at the rear-axle station keeps a (kappa - 1) share
    d = lateral_clearance(GEOM, v_x)
    theta_max = math.atan(GEOM.v_y_max / v_x)
    theta = heading * theta_max
    y = max(y_rear, face + d)
    edge = y - GEOM.B / (2 * math.cos(theta))
    assert edge - face >= 0.1 * GEOM.B / (2 * math.cos(theta_max)) - 1e-9
