"""Collision hazard moments and the per-step lateral envelope for the planner.

Lateral coordinates here are in the evasion frame: ``y = 0`` is the ego lane
centre (rear-axle midpoint reference) and positive ``y`` points toward the
side the ego evades to. Callers mirror road-frame values with
``direction`` before and after planning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, NoConflict


@dataclass(frozen=True)
class EgoGeometry:
    B: float = 1.9  # width
    S_f: float = 3.6  # rear-axle midpoint to front end
    S_r: float = 0.9  # rear-axle midpoint to rear end
    v_y_max: float = 2.0

    def __post_init__(self) -> None:
        if self.B <= 0 or self.S_f <= 0 or self.S_r < 0:
            raise ValueError("invalid ego geometry")
        if self.v_y_max < 0:
            raise ValueError("v_y_max must be >= 0")

    @property
    def length(self) -> float:
        return self.S_f + self.S_r


@dataclass(frozen=True)
class ObstacleSnapshot:
    """Obstacle as seen at planning time, in the road frame.

    ``gap`` is measured from the ego front end to the obstacle's near face.
    ``v`` and ``a`` are signed longitudinal values (``v < 0`` oncoming).
    """

    gap: float
    length: float
    width: float
    v: float = 0.0
    a: float = 0.0
    y: float = 0.0
    v_lat: float = 0.0


@dataclass(frozen=True)
class HazardTiming:
    t_haz_near: float
    t_haz_far: float
    N_obj1: int
    N_obj2: int
    N_end: int


@dataclass(frozen=True)
class SafetyEnvelope:
    y_min: np.ndarray
    y_max: np.ndarray
    W: float
    W_obj: float
    delta_y: float
    d_lat: float
    T_s: float

    def __post_init__(self) -> None:
        self.y_min.setflags(write=False)
        self.y_max.setflags(write=False)

    @property
    def N_end(self) -> int:
        return len(self.y_min)


def collision_hazard_time(v_ego: float, v_obj: float, a_obj: float, L: float) -> float:
    """Time until the ego, at constant ``v_ego``, closes the gap ``L``.

    The obstacle moves with signed ``v_obj`` and signed ``a_obj``; a braking
    obstacle (``a_obj < 0``) stops and stays put.
    """
    if v_ego <= 0:
        raise ValueError("v_ego must be > 0")
    if L <= 0:
        raise ValueError("L must be > 0")

    if a_obj >= 0 or v_obj <= 0:
        closing = v_ego - v_obj
        if closing <= 0:
            raise NoConflict("obstacle is not being closed on")
        return L / closing

    a = -a_obj
    t_brake = v_obj / a
    x_brake = v_obj**2 / (2 * a)
    if v_ego * t_brake >= L + x_brake:
        # contact happens while the obstacle is still decelerating
        dv = v_obj - v_ego
        disc = dv**2 + 2 * a * L
        if disc < 0:
            raise NoConflict("negative discriminant")
        root = math.sqrt(disc)
        if dv <= 0:
            # same root without cancellation for small decelerations
            return 2 * L / (root - dv)
        return (dv + root) / a
    # obstacle is already at rest when the ego arrives
    return (v_obj**2 + 2 * a * L) / (2 * a * v_ego)


def lateral_clearance(geom: EgoGeometry, v_x: float, kappa: float = 1.1) -> float:
    """Minimum lateral distance from the rear-axle midpoint to the obstacle face."""
    if v_x <= 0:
        raise ValueError("v_x must be > 0")
    theta_max = math.atan(geom.v_y_max / v_x)
    return kappa * geom.B / (2 * math.cos(theta_max))


def hazard_timing(
    obstacle: ObstacleSnapshot,
    v_ego: float,
    geom: EgoGeometry,
    T_s: float,
    merge_margin: float,
) -> HazardTiming:
    """Start and end of the longitudinal overlap window, as planner step indices.

    The window opens when the ego front end reaches the near face and closes
    when the ego rear end passes the far face. Indices round outward so the
    sampled constraint covers the whole window.
    """
    t_near = collision_hazard_time(v_ego, obstacle.v, obstacle.a, obstacle.gap)
    far_gap = obstacle.gap + obstacle.length + geom.length
    t_far = collision_hazard_time(v_ego, obstacle.v, obstacle.a, far_gap)
    n1 = int(math.floor(t_near / T_s + 1e-9))
    n2 = int(math.ceil(t_far / T_s - 1e-9)) + 1
    n_end = n2 + max(1, int(math.ceil(merge_margin / T_s - 1e-9)))
    return HazardTiming(t_near, t_far, n1, n2, n_end)


def predicted_face(obstacle: ObstacleSnapshot, t: float, direction: int = 1) -> float:
    """Obstacle face nearest the evasion side at time ``t``, evasion frame."""
    y = direction * (obstacle.y + obstacle.v_lat * t)
    return y + obstacle.width / 2


def envelope_from_indices(
    N_obj1: int,
    N_obj2: int,
    N_end: int,
    W: float,
    W_obj_clear: float,
    delta_y: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Lower/upper lateral bounds per step; ``W_obj_clear`` already includes clearance."""
    if not 0 <= N_obj1 <= N_obj2 < N_end:
        raise ValueError("require 0 <= N_obj1 <= N_obj2 < N_end")
    y_max = np.full(N_end, W + delta_y)
    y_min = np.zeros(N_end)
    y_min[N_obj1:N_obj2] = W_obj_clear
    y_min[N_end - 1] = W - delta_y
    return y_min, y_max


def build_envelope(
    obstacle: ObstacleSnapshot,
    v_ego: float,
    geom: EgoGeometry,
    T_s: float = 0.05,
    merge_margin: float = 1.5,
    *,
    W: float = 3.5,
    delta_y: float = 0.2,
    kappa: float = 1.1,
    direction: int = 1,
    y0: float = 0.0,
) -> tuple[SafetyEnvelope, HazardTiming]:
    """Envelope and hazard timing for one obstacle; ``y0`` is the ego lateral position (evasion frame).

    Raises ``InfeasibleError`` when the hazard is too close for any lateral
    plan or when even a speed-capped straight ramp cannot stay inside.
    """
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    timing = hazard_timing(obstacle, v_ego, geom, T_s, merge_margin)
    if timing.N_obj1 < 2:
        raise InfeasibleError("hazard too imminent for a lateral plan", step=timing.N_obj1)

    # constant-velocity lateral prediction; worst case over the overlap window
    W_obj = max(
        predicted_face(obstacle, timing.t_haz_near, direction),
        predicted_face(obstacle, timing.t_haz_far, direction),
    )
    d_lat = lateral_clearance(geom, v_ego, kappa)
    y_min, y_max = envelope_from_indices(
        timing.N_obj1, timing.N_obj2, timing.N_end, W, W_obj + d_lat, delta_y
    )
    y_min[0] = min(y_min[0], y0)
    y_max[0] = max(y_max[0], y0)

    bad = np.nonzero(y_min > y_max)[0]
    if bad.size:
        raise InfeasibleError("obstacle leaves no lateral room", step=int(bad[0]))

    # witness: ramp at the lateral speed cap toward the target lane, then hold
    k = np.arange(timing.N_end)
    witness = np.minimum(y0 + geom.v_y_max * T_s * k, max(y0, W))
    miss = np.nonzero((witness < y_min - 1e-12) | (witness > y_max + 1e-12))[0]
    if miss.size:
        raise InfeasibleError("envelope not reachable at the lateral speed cap", step=int(miss[0]))

    env = SafetyEnvelope(y_min, y_max, W, W_obj, delta_y, d_lat, T_s)
    return env, timing
