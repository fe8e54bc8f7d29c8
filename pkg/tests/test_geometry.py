import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from collision_avoidance.geometry import Box, Pose, check_collision, ego_corners, polygon_distance, separation

FRONT, REAR, WIDTH = 3.6, 0.9, 1.9


def test_identical_pose_collides():
    box = Box(-REAR, FRONT, -WIDTH / 2, WIDTH / 2)
    assert check_collision(Pose(0.0, 0.0), FRONT, REAR, WIDTH, box)


def test_longitudinal_gap_is_clear():
    box = Box.from_near_face(FRONT + 10.0, 0.0, 4.5, 1.9)
    assert not check_collision(Pose(0.0, 0.0), FRONT, REAR, WIDTH, box)
    assert separation(Pose(0.0, 0.0), FRONT, REAR, WIDTH, box) == pytest.approx(10.0)


def test_touching_corners_collide():
    box = Box(FRONT, FRONT + 4.0, WIDTH / 2, WIDTH / 2 + 2.0)
    assert check_collision(Pose(0.0, 0.0), FRONT, REAR, WIDTH, box)
    assert separation(Pose(0.0, 0.0), FRONT, REAR, WIDTH, box) == 0.0


def test_rotated_ego_reaches_further_sideways():
    box = Box(0.0, 2.0, 1.2, 2.0)
    assert not check_collision(Pose(0.0, 0.0), FRONT, REAR, WIDTH, box)
    assert check_collision(Pose(0.0, 0.0, heading=0.3), FRONT, REAR, WIDTH, box)


def test_ego_corners_order_and_size():
    c = ego_corners(Pose(1.0, 2.0, math.pi / 2), FRONT, REAR, WIDTH)
    assert c[0] == pytest.approx([1.0 + WIDTH / 2, 2.0 - REAR])
    assert c[2] == pytest.approx([1.0 - WIDTH / 2, 2.0 + FRONT])


@given(
    x=st.floats(-20, 20), y=st.floats(-5, 5), heading=st.floats(-0.5, 0.5),
    bx=st.floats(-20, 20), by=st.floats(-5, 5), length=st.floats(0.2, 6), width=st.floats(0.2, 3),
)
def test_separation_consistent_with_overlap(x, y, heading, bx, by, length, width):
    pose = Pose(x, y, heading)
    box = Box.from_near_face(bx, by, length, width)
    hit = check_collision(pose, FRONT, REAR, WIDTH, box)
    sep = separation(pose, FRONT, REAR, WIDTH, box)
    assert (sep == 0.0) == hit
    assert sep >= 0.0
    # symmetric in argument order
    assert polygon_distance(box.corners(), ego_corners(pose, FRONT, REAR, WIDTH)) == pytest.approx(sep)


@given(dx=st.floats(0.0, 50.0), y=st.floats(-3, 3))
def test_axis_aligned_gap_equals_distance(dx, y):
    box = Box.from_near_face(FRONT + dx, y, 4.0, 0.5)
    sep = separation(Pose(0.0, y), FRONT, REAR, WIDTH, box)
    assert sep == pytest.approx(dx, abs=1e-9)
