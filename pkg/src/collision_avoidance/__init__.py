"""Multi-level emergency collision avoidance: staged braking, emergency steering
via a jerk-bounded lateral QP, and a closed-loop scenario simulator."""

from .drivable_area import EgoGeometry, ObstacleSnapshot, SafetyEnvelope, build_envelope, collision_hazard_time
from .errors import InfeasibleError, IterationLimitError, NoConflict
from .lateral_qp import KinematicLimits, LateralState, LateralTrajectory, QPProblem, Weights, assemble, solve, validate
from .risk_decision import DecisionState, Mode, RiskInput, Thresholds, decide, ttc_inverse
from .safety_distance import BrakingParams, ObstacleMotionClass, SafetyTriple, braking_distance, safety_triple
from .scenario import ScenarioError, ScenarioSpec, load_scenario, parse_scenario, serialize_scenario
from .simulator import SimLog, run, summarize

__all__ = [
    "BrakingParams",
    "DecisionState",
    "EgoGeometry",
    "InfeasibleError",
    "IterationLimitError",
    "KinematicLimits",
    "LateralState",
    "LateralTrajectory",
    "Mode",
    "NoConflict",
    "ObstacleMotionClass",
    "ObstacleSnapshot",
    "QPProblem",
    "RiskInput",
    "SafetyEnvelope",
    "SafetyTriple",
    "ScenarioError",
    "ScenarioSpec",
    "SimLog",
    "Thresholds",
    "Weights",
    "assemble",
    "braking_distance",
    "build_envelope",
    "collision_hazard_time",
    "decide",
    "load_scenario",
    "parse_scenario",
    "run",
    "safety_triple",
    "serialize_scenario",
    "solve",
    "summarize",
    "ttc_inverse",
    "validate",
]
