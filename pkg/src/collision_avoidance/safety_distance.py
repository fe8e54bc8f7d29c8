"""Braking distance and the warning / start-braking / minimum distance triple.

All quantities are SI (m, s, m/s, m/s^2). The km/h forms with the 1/3.6 and
1/25.92 factors reduce algebraically to the expressions used here.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

G = 9.81


@dataclass(frozen=True)
class BrakingParams:
    tau1: float = 0.3  # brake system adjustment (dead) time [s]
    tau2: float = 0.6  # deceleration build-up time [s]
    t_driver: float = 1.0  # driver reaction allowance, warning distance only [s]
    a_trigger: float = 4.0  # comfort braking level [m/s^2]
    a_max_cap: float = 7.0  # emergency braking level [m/s^2]
    mu: float = 0.7
    g: float = G
    clamp_to_adhesion: bool = False

    def __post_init__(self) -> None:
        for name in ("tau1", "tau2", "t_driver"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0 < self.mu <= 1.2:
            raise ValueError("mu must be in (0, 1.2]")
        if self.a_trigger <= 0 or self.a_max_cap <= 0:
            raise ValueError("braking levels must be > 0")
        a_min, a_max = self.decel_bounds()
        if a_min > a_max:
            raise ValueError("a_min exceeds a_max")

    def decel_bounds(self) -> tuple[float, float]:
        return decel_bounds(
            self.mu,
            g=self.g,
            a_trigger=self.a_trigger,
            a_max_cap=self.a_max_cap,
            clamp_to_adhesion=self.clamp_to_adhesion,
        )


class MotionClass(enum.Enum):
    STATIONARY = "Stationary"
    UNIFORM_OR_ACCELERATING = "UniformOrAccelerating"
    EMERGENCY_BRAKING = "EmergencyBraking"


@dataclass(frozen=True)
class ObstacleMotionClass:
    """Longitudinal motion state of the obstacle ahead.

    ``a_obj`` is the deceleration magnitude for ``EMERGENCY_BRAKING`` and the
    signed longitudinal acceleration otherwise.
    """

    tag: MotionClass
    v_obj: float = 0.0
    a_obj: float = 0.0

    def __post_init__(self) -> None:
        if self.tag is MotionClass.STATIONARY and self.v_obj != 0:
            raise ValueError("stationary obstacle must have v_obj == 0")
        if self.tag is MotionClass.EMERGENCY_BRAKING and self.a_obj <= 0:
            raise ValueError("emergency braking requires a_obj > 0")

    @classmethod
    def stationary(cls) -> "ObstacleMotionClass":
        return cls(MotionClass.STATIONARY)

    @classmethod
    def uniform(cls, v_obj: float, a_obj: float = 0.0) -> "ObstacleMotionClass":
        return cls(MotionClass.UNIFORM_OR_ACCELERATING, v_obj, a_obj)

    @classmethod
    def braking(cls, v_obj: float, a_obj: float) -> "ObstacleMotionClass":
        return cls(MotionClass.EMERGENCY_BRAKING, v_obj, a_obj)


@dataclass(frozen=True)
class SafetyTriple:
    L_w: float
    L_b: float
    L_s: float
    no_conflict: bool = False

    @classmethod
    def none(cls) -> "SafetyTriple":
        return cls(0.0, 0.0, 0.0, no_conflict=True)


def braking_distance(v_ego: float, v_end: float, a: float, params: BrakingParams) -> float:
    """Distance covered while braking from ``v_ego`` to ``v_end`` at target ``a``.

    Dead time ``tau1`` plus half the build-up time ``tau2`` act as pure
    travel at ``v_ego``; the remainder is constant deceleration.
    """
    if a <= 0:
        raise ValueError("deceleration must be > 0")
    if v_end < 0 or v_end > v_ego:
        raise ValueError("require v_ego >= v_end >= 0")
    return (params.tau1 + params.tau2 / 2) * v_ego + (v_ego**2 - v_end**2) / (2 * a)


def braking_distance_kmh(v_ego_kmh: float, v_end_kmh: float, a: float, params: BrakingParams) -> float:
    """Same model written with speeds in km/h, kept for the unit-equivalence check."""
    if a <= 0:
        raise ValueError("deceleration must be > 0")
    return (1 / 3.6) * (params.tau1 + params.tau2 / 2) * v_ego_kmh + (
        v_ego_kmh**2 - v_end_kmh**2
    ) / (25.92 * a)


def standstill_margin(v_ego: float) -> float:
    """Residual gap kept at the end of braking. ``v_ego`` in m/s."""
    if v_ego < 0:
        raise ValueError("v_ego must be >= 0")
    if v_ego == 0:
        return 3.6
    return max(0.2364 * v_ego + 1.6109, 3.6)


def decel_bounds(
    mu: float,
    g: float = G,
    a_trigger: float = 4.0,
    a_max_cap: float = 7.0,
    clamp_to_adhesion: bool = False,
) -> tuple[float, float]:
    """Return ``(a_min, a_max)``: the braking trigger and maximum decelerations.

    With ``clamp_to_adhesion`` the maximum is additionally limited to ``mu*g``,
    which matters on low-adhesion roads where ``max(7, mu*g)`` exceeds grip.
    """
    if mu <= 0:
        raise ValueError("mu must be > 0")
    grip = mu * g
    a_min = min(a_trigger, grip)
    a_max = max(a_max_cap, grip)
    if clamp_to_adhesion:
        a_max = min(a_max, grip)
    return a_min, a_max


def safety_triple(v_ego: float, obstacle: ObstacleMotionClass, params: BrakingParams) -> SafetyTriple:
    if v_ego < 0:
        raise ValueError("v_ego must be >= 0")
    a_min, a_max = params.decel_bounds()
    d_safe = standstill_margin(v_ego)
    tau1, tau2 = params.tau1, params.tau2
    v_obj = obstacle.v_obj

    if obstacle.tag is MotionClass.STATIONARY:
        ramp = (tau1 + tau2 / 2) * v_ego
        k_min = v_ego**2 / (2 * a_min)
        k_max = v_ego**2 / (2 * a_max)
    elif obstacle.tag is MotionClass.UNIFORM_OR_ACCELERATING:
        if v_ego < v_obj:
            return SafetyTriple.none()
        ramp = (tau1 + tau2 / 2) * (v_ego - v_obj)
        k_min = (v_ego**2 - v_obj**2) / (2 * a_min)
        k_max = (v_ego**2 - v_obj**2) / (2 * a_max)
    else:
        # a braking obstacle always ends up slower than the ego, so the row
        # stays meaningful even while v_ego < v_obj
        obj_stop = v_obj**2 / (2 * obstacle.a_obj)
        ramp = tau1 * v_ego + (tau2 / 2) * (v_ego - v_obj)
        k_min = v_ego**2 / (2 * a_min) - obj_stop
        k_max = v_ego**2 / (2 * a_max) - obj_stop

    L_b = ramp + k_min + d_safe
    L_s = ramp + k_max + d_safe
    L_w = L_b + params.t_driver * v_ego
    if not all(math.isfinite(x) for x in (L_w, L_b, L_s)):
        raise ValueError("non-finite safety distance")
    return SafetyTriple(L_w, L_b, L_s)


def classify_obstacle(v_obj: float, a_obj: float, v_eps: float = 1e-3) -> ObstacleMotionClass:
    """Pick the distance-table row for an obstacle ahead moving with ``v_obj``, ``a_obj`` (signed)."""
    if v_obj <= v_eps:
        return ObstacleMotionClass.stationary()
    if a_obj < 0:
        return ObstacleMotionClass.braking(v_obj, -a_obj)
    return ObstacleMotionClass.uniform(v_obj, a_obj)
