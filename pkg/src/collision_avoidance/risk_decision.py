"""Multi-level decision machine: warn, brake, steer, pre-crash brake, hand back."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable

from .safety_distance import SafetyTriple


class Mode(enum.IntEnum):
    # ordered by severity
    NORMAL = 0
    WARNING = 1
    EMERGENCY_BRAKE = 2
    EMERGENCY_STEER = 3
    PRE_CRASH_BRAKE = 4
    DRIVER_OVERRIDE = 5

    @property
    def label(self) -> str:
        return _LABELS[self]


_LABELS = {
    Mode.NORMAL: "Normal",
    Mode.WARNING: "Warning",
    Mode.EMERGENCY_BRAKE: "EmergencyBrake",
    Mode.EMERGENCY_STEER: "EmergencySteer",
    Mode.PRE_CRASH_BRAKE: "PreCrashBrake",
    Mode.DRIVER_OVERRIDE: "DriverOverride",
}


class Trigger(enum.Enum):
    NONE = "none"
    DISTANCE = "distance-threshold"
    TTC = "ttc-threshold"
    PLANNER_INFEASIBLE = "planner-infeasible"
    DRIVER_INPUT = "driver-input"
    MANEUVER_COMPLETE = "maneuver-complete"


class DegenerateGeometryError(ValueError):
    """Relative distance is zero or negative: the bodies already overlap."""


@dataclass(frozen=True)
class Thresholds:
    ttc_war_inv: float = 0.3
    ttc_str_inv: float = 0.5


@dataclass(frozen=True)
class DecisionState:
    mode: Mode = Mode.NORMAL
    entered_at: float = 0.0
    trigger: Trigger = Trigger.NONE
    a_cmd: float | None = None  # braking modes only

    @property
    def label(self) -> str:
        if self.a_cmd is not None:
            return f"{self.mode.label}({self.a_cmd:.6g})"
        return self.mode.label

    def severity(self) -> tuple[int, float]:
        return (int(self.mode), self.a_cmd or 0.0)


@dataclass(frozen=True)
class RiskInput:
    L: float
    triple: SafetyTriple | None = None
    ttc_inv: float | None = None
    oncoming: bool = False
    driver_active: bool = False
    planner_feasible: bool = True
    maneuver_done: bool = False
    a_min: float = 4.0
    a_max: float = 7.0

    def __post_init__(self) -> None:
        if self.L < 0:
            raise ValueError("L must be >= 0")
        if self.oncoming != (self.ttc_inv is not None):
            raise ValueError("ttc_inv must be given exactly for oncoming obstacles")


def ttc_inverse(v_ego: float, v_obj: float, L: float) -> float:
    """Inverse time to collision; ``v_obj`` is signed (negative when oncoming)."""
    if L <= 0:
        raise DegenerateGeometryError(f"relative distance {L} <= 0")
    return (v_ego - v_obj) / L


def _ladder(inp: RiskInput, thresholds: Thresholds) -> tuple[Mode, Trigger, float | None]:
    if inp.oncoming:
        # braking cannot resolve an oncoming conflict: TTC ladder only
        if inp.ttc_inv >= thresholds.ttc_str_inv:
            return Mode.EMERGENCY_STEER, Trigger.TTC, None
        if inp.ttc_inv >= thresholds.ttc_war_inv:
            return Mode.WARNING, Trigger.TTC, None
        return Mode.NORMAL, Trigger.TTC, None

    tri = inp.triple
    if tri is None or tri.no_conflict:
        return Mode.NORMAL, Trigger.NONE, None
    # ties escalate
    if inp.L <= tri.L_s:
        return Mode.EMERGENCY_STEER, Trigger.DISTANCE, None
    if inp.L <= tri.L_b:
        return Mode.EMERGENCY_BRAKE, Trigger.DISTANCE, inp.a_min
    if inp.L <= tri.L_w:
        return Mode.WARNING, Trigger.DISTANCE, None
    return Mode.NORMAL, Trigger.DISTANCE, None


def decide(
    inp: RiskInput,
    prev: DecisionState,
    thresholds: Thresholds = Thresholds(),
    t: float = 0.0,
) -> DecisionState:
    """One tick of the decision machine for a single obstacle."""
    if prev.mode is Mode.DRIVER_OVERRIDE:
        return prev
    if inp.driver_active:
        return DecisionState(Mode.DRIVER_OVERRIDE, t, Trigger.DRIVER_INPUT)

    if prev.mode is Mode.EMERGENCY_STEER:
        if inp.maneuver_done:
            return DecisionState(Mode.NORMAL, t, Trigger.MANEUVER_COMPLETE)
        return prev
    if prev.mode is Mode.PRE_CRASH_BRAKE:
        return prev
    if prev.mode is Mode.EMERGENCY_BRAKE:
        tri = inp.triple
        escalate = (
            not inp.oncoming
            and tri is not None
            and not tri.no_conflict
            and prev.a_cmd is not None
            and prev.a_cmd < inp.a_max
            and inp.L <= tri.L_s
        )
        if escalate:
            return DecisionState(Mode.EMERGENCY_BRAKE, t, Trigger.DISTANCE, inp.a_max)
        return prev

    mode, trigger, a_cmd = _ladder(inp, thresholds)
    if mode is Mode.EMERGENCY_STEER and not inp.planner_feasible:
        mode, trigger, a_cmd = Mode.PRE_CRASH_BRAKE, Trigger.PLANNER_INFEASIBLE, inp.a_max
    if mode is prev.mode and a_cmd == prev.a_cmd:
        return prev
    return DecisionState(mode, t, trigger, a_cmd)


def most_severe(states: Iterable[DecisionState], default: DecisionState) -> DecisionState:
    """Combine per-obstacle decisions; the most severe wins."""
    best = default
    for s in states:
        if s.severity() > best.severity():
            best = s
    return best
