"""Footprint polygons, separating-axis overlap test and separation distance.

The ego is an oriented rectangle anchored at its rear-axle midpoint; every
obstacle is an axis-aligned rectangle in the road frame. Rectangles are
closed sets, so touching edges or corners count as contact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float = 0.0


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle ``[x_min, x_max] x [y_min, y_max]``."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    @classmethod
    def from_near_face(cls, x_near: float, y_centre: float, length: float, width: float) -> "Box":
        return cls(x_near, x_near + length, y_centre - width / 2, y_centre + width / 2)

    def corners(self) -> np.ndarray:
        return np.array(
            [
                [self.x_min, self.y_min],
                [self.x_max, self.y_min],
                [self.x_max, self.y_max],
                [self.x_min, self.y_max],
            ]
        )


def ego_corners(pose: Pose, front: float, rear: float, width: float) -> np.ndarray:
    """Counter-clockwise corners of the ego rectangle."""
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    local = np.array(
        [
            [-rear, -width / 2],
            [front, -width / 2],
            [front, width / 2],
            [-rear, width / 2],
        ]
    )
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([pose.x, pose.y])


def _axes(poly: np.ndarray) -> np.ndarray:
    edges = np.roll(poly, -1, axis=0) - poly
    return np.column_stack([-edges[:, 1], edges[:, 0]])


def polygons_overlap(a: np.ndarray, b: np.ndarray) -> bool:
    """Separating-axis test for two convex polygons given as ordered corners."""
    for axis in np.vstack([_axes(a), _axes(b)]):
        pa = a @ axis
        pb = b @ axis
        # strict inequality: touching projections are not separated
        if pa.max() < pb.min() or pb.max() < pa.min():
            return False
    return True


def _point_segment(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0 else min(1.0, max(0.0, float((p - a) @ ab) / denom))
    return float(np.hypot(*(a + t * ab - p)))


def polygon_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean separation of two convex polygons, zero when they overlap."""
    if polygons_overlap(a, b):
        return 0.0
    best = math.inf
    for P, Q in ((a, b), (b, a)):
        for p in P:
            for i in range(len(Q)):
                best = min(best, _point_segment(p, Q[i], Q[(i + 1) % len(Q)]))
    return best


def check_collision(ego_pose: Pose, front: float, rear: float, width: float, obstacle: Box) -> bool:
    return polygons_overlap(ego_corners(ego_pose, front, rear, width), obstacle.corners())


def separation(ego_pose: Pose, front: float, rear: float, width: float, obstacle: Box) -> float:
    return polygon_distance(ego_corners(ego_pose, front, rear, width), obstacle.corners())
