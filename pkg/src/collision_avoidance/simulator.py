"""Fixed-step closed-loop harness.

Each tick: apply scripted obstacle triggers and visibility gates, evaluate the
safety distances (or TTC for oncoming traffic) per visible obstacle, step the
decision machine, plan once on entering emergency steering, log, then
propagate ego and obstacles by ``dt``. The lateral plan is executed exactly
(kinematic playback) in place of a tracking controller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import lateral_qp as qp
from .drivable_area import HazardTiming, ObstacleSnapshot, SafetyEnvelope, build_envelope
from .errors import InfeasibleError, IterationLimitError, NoConflict
from .geometry import Box, Pose, separation
from .longitudinal import BrakeActuator, LongitudinalState, step
from .risk_decision import DecisionState, Mode, RiskInput, decide, most_severe, ttc_inverse
from .safety_distance import classify_obstacle, safety_triple
from .scenario import ObstacleSpec, ScenarioSpec

V_EPS = 1e-3
ENVELOPE_TOL = 1e-6
BRAKING_MODES = (Mode.EMERGENCY_BRAKE, Mode.PRE_CRASH_BRAKE)


@dataclass(frozen=True)
class RunOptions:
    """Per-run overrides of the scenario's step sizes."""

    dt: float | None = None
    T_s: float | None = None


@dataclass
class ObstacleState:
    spec: ObstacleSpec
    x: float  # near face, road frame
    y: float  # lateral centre
    v: float
    a: float = 0.0  # achieved longitudinal acceleration
    t_trigger: float | None = None
    visible: bool = False
    stopped: bool = False

    def target_accel(self) -> float:
        """Scripted acceleration used for classification once the script has fired."""
        if self.spec.trigger is None or self.t_trigger is not None:
            return self.spec.a
        return 0.0

    def accel_at(self, t: float, ramp: float) -> float:
        if self.spec.trigger is None:
            return self.spec.a
        if self.t_trigger is None:
            return 0.0
        if ramp <= 0:
            return self.spec.a
        return self.spec.a * min(1.0, (t - self.t_trigger) / ramp)

    def box(self) -> Box:
        return Box.from_near_face(self.x, self.y, self.spec.length, self.spec.width)


@dataclass(frozen=True)
class Plan:
    """A solved lateral maneuver, stored in the road frame."""

    k_start: int  # simulation tick at which the plan starts
    substeps: int  # simulation ticks per planner step
    direction: int
    trajectory: qp.LateralTrajectory
    envelope: SafetyEnvelope
    timing: HazardTiming
    problem: qp.QPProblem
    obstacle: int

    @property
    def k_end(self) -> int:
        return self.k_start + (self.trajectory.Y.shape[0] - 1) * self.substeps

    def sample(self, k: int) -> tuple[float, float, float, float]:
        """Road-frame ``(y, v_y, a_y, j_y)`` at tick ``k``, linearly interpolated."""
        Y = self.trajectory.Y
        i, r = divmod(k - self.k_start, self.substeps)
        if i >= len(Y) - 1:
            row = Y[-1]
        else:
            w = r / self.substeps
            row = (1 - w) * Y[i] + w * Y[i + 1]
            row = np.array([row[0], row[1], row[2], Y[i, 3]])
        d = self.direction
        return d * float(row[0]), d * float(row[1]), d * float(row[2]), d * float(row[3])


@dataclass(frozen=True)
class Row:
    t: float
    x: float
    y: float
    v: float
    a: float
    v_y: float
    a_y: float
    mode: str
    L: float | None
    L_w: float | None
    L_b: float | None
    L_s: float | None
    ttc_inv: float | None
    plan: tuple[float, float, float, float] | None
    obstacles: tuple[tuple[float, float, float, float], ...]  # x, y, v, lateral_v
    separations: tuple[float, ...]


@dataclass
class SimLog:
    name: str
    dt: float
    rows: list[Row] = field(default_factory=list)
    plan: Plan | None = None
    planner_error: str | None = None
    envelope_violation: float | None = None
    end_reason: str = ""

    @property
    def envelope(self) -> SafetyEnvelope | None:
        return None if self.plan is None else self.plan.envelope


@dataclass(frozen=True)
class Summary:
    collision: bool
    min_gap: float
    final_gap: float | None
    max_abs_ay: float
    timeline: tuple[tuple[float, str], ...]
    impact_speed: float | None
    final_v: float
    duration: float


def summarize(log: SimLog) -> Summary:
    """Recompute the summary from the logged rows; pure and idempotent."""
    rows = log.rows
    if not rows:
        raise ValueError("empty log")
    timeline: list[tuple[float, str]] = []
    impact = None
    min_gap = math.inf
    for row in rows:
        if not timeline or timeline[-1][1] != row.mode:
            timeline.append((row.t, row.mode))
        if row.separations:
            min_gap = min(min_gap, min(row.separations))
        if impact is None:
            hits = [i for i, s in enumerate(row.separations) if s == 0.0]
            if hits:
                impact = max(
                    math.hypot(row.v - row.obstacles[i][2], row.v_y - row.obstacles[i][3]) for i in hits
                )
    last = rows[-1]
    return Summary(
        collision=impact is not None,
        min_gap=min_gap,
        final_gap=last.L,
        max_abs_ay=max(abs(r.a_y) for r in rows),
        timeline=tuple(timeline),
        impact_speed=impact,
        final_v=last.v,
        duration=last.t,
    )


def _advance_obstacle(o: ObstacleState, t: float, dt: float, ramp: float) -> None:
    a0 = o.accel_at(t, ramp)
    a1 = o.accel_at(t + dt, ramp)
    a = 0.5 * (a0 + a1)
    o.y += o.spec.lateral_v * dt
    if o.stopped:
        o.a = 0.0
        return
    v0 = o.v
    v1 = v0 + a * dt
    if a * v0 < 0 and v0 * v1 <= 0:
        # braking script: stop inside the step and stay at rest
        o.x += -v0**2 / (2 * a)
        o.v = 0.0
        o.a = 0.0
        o.stopped = True
        return
    o.x += 0.5 * (v0 + v1) * dt
    o.v = v1
    o.a = a1


def _risk_inputs(
    spec: ScenarioSpec,
    ego: LongitudinalState,
    obstacles: list[ObstacleState],
    nose: float,
    driver_active: bool,
    maneuver_done: bool,
) -> list[tuple[int, RiskInput]]:
    params = spec.ego.params
    a_min, a_max = params.decel_bounds()
    out = []
    for i, o in enumerate(obstacles):
        L = o.x - nose
        if not o.visible or L <= 0:
            continue
        if o.v < -V_EPS:
            inp = RiskInput(
                L,
                None,
                ttc_inverse(ego.v, o.v, L),
                oncoming=True,
                driver_active=driver_active,
                maneuver_done=maneuver_done,
                a_min=a_min,
                a_max=a_max,
            )
        else:
            cls = classify_obstacle(o.v, o.target_accel(), V_EPS)
            inp = RiskInput(
                L,
                safety_triple(ego.v, cls, params),
                driver_active=driver_active,
                maneuver_done=maneuver_done,
                a_min=a_min,
                a_max=a_max,
            )
        out.append((i, inp))
    return out


def _plan(
    spec: ScenarioSpec,
    ego: LongitudinalState,
    lateral: tuple[float, float, float],
    o: ObstacleState,
    nose: float,
    T_s: float,
    k: int,
    substeps: int,
    index: int,
) -> Plan:
    """Envelope, QP and solution for one obstacle; raises ``InfeasibleError`` on failure."""
    d = spec.planner.evade_direction
    geom = spec.ego.geometry
    snap = ObstacleSnapshot(
        gap=o.x - nose,
        length=o.spec.length,
        width=o.spec.width,
        v=o.v,
        a=o.target_accel(),
        y=o.y,
        v_lat=o.spec.lateral_v,
    )
    env, timing = build_envelope(
        snap,
        ego.v,
        geom,
        T_s,
        spec.planner.merge_margin,
        W=spec.road.W,
        delta_y=spec.road.delta_y,
        kappa=spec.planner.kappa,
        direction=d,
        y0=d * lateral[0],
    )
    limits = qp.KinematicLimits.from_adhesion(
        spec.road.mu,
        g=spec.ego.params.g,
        frac=spec.planner.a_y_frac,
        v_max=geom.v_y_max,
        j_max=spec.planner.j_max,
    )
    problem = qp.assemble(env, limits, spec.planner.weights, T_s)
    init = qp.LateralState(d * lateral[0], d * lateral[1], d * lateral[2])
    try:
        traj = qp.solve(problem, init)
    except IterationLimitError as exc:
        raise InfeasibleError(str(exc)) from exc
    return Plan(k, substeps, d, traj, env, timing, problem, index)


def envelope_violation(plan: Plan) -> float:
    """Largest excursion of the planned positions outside the envelope (evasion frame)."""
    y = plan.trajectory.y
    env = plan.envelope
    return float(max(np.max(env.y_min - y), np.max(y - env.y_max), 0.0))


def run(spec: ScenarioSpec, options: RunOptions | None = None) -> SimLog:
    options = options or RunOptions()
    dt = options.dt if options.dt is not None else spec.sim.dt
    T_s = options.T_s if options.T_s is not None else spec.planner.T_s
    ratio = T_s / dt
    substeps = int(round(ratio))
    if substeps < 1 or abs(ratio - substeps) > 1e-9 * max(1.0, ratio):
        raise ValueError(f"dt={dt:g} must divide T_s={T_s:g}")

    geom = spec.ego.geometry
    params = spec.ego.params
    ramp = params.tau2
    ego = LongitudinalState(0.0, spec.ego.v0)
    lat_y, lat_vy, lat_ay = spec.ego.y0, 0.0, 0.0
    obstacles = [ObstacleState(o, geom.S_f + o.x0, o.y0, o.v) for o in spec.obstacles]
    state = DecisionState()
    brake = BrakeActuator()
    log = SimLog(spec.name, dt)
    plan: Plan | None = None
    t_settle: float | None = None
    k_max = int(math.ceil(spec.sim.t_max / dt - 1e-9))

    for k in range(k_max + 1):
        t = k * dt
        nose = ego.x + geom.S_f
        for o in obstacles:
            gap = o.x - nose
            if o.spec.trigger is not None and o.t_trigger is None and o.spec.trigger.reached(t, gap):
                o.t_trigger = t
            if not o.visible and (o.spec.visible_from is None or o.spec.visible_from.reached(t, gap)):
                o.visible = True

        driver_active = spec.sim.driver_override_at is not None and t >= spec.sim.driver_override_at
        maneuver_done = plan is not None and k >= plan.k_end
        inputs = _risk_inputs(spec, ego, obstacles, nose, driver_active, maneuver_done)

        if not spec.sim.disable_system:
            prev = state
            state = _combine(inputs, prev, spec, t, driver_active, maneuver_done)
            if state.mode is Mode.EMERGENCY_STEER and prev.mode is not Mode.EMERGENCY_STEER:
                idx = _steer_source(inputs, prev, spec, t)
                try:
                    new_plan = _plan(spec, ego, (lat_y, lat_vy, lat_ay), obstacles[idx], nose, T_s, k, substeps, idx)
                    viol = envelope_violation(new_plan)
                    log.envelope_violation = viol
                    if viol > ENVELOPE_TOL:
                        raise InfeasibleError(f"plan leaves the envelope by {viol:.3g} m")
                    plan = new_plan
                    log.plan = plan
                except (InfeasibleError, NoConflict) as exc:
                    log.planner_error = str(exc)
                    inputs = [(i, replace(inp, planner_feasible=False)) for i, inp in inputs]
                    state = _combine(inputs, prev, spec, t, driver_active, maneuver_done)
            if prev.mode is Mode.EMERGENCY_STEER and state.mode is Mode.NORMAL:
                t_settle = t + spec.sim.settle_time

        # logging uses the nearest relevant obstacle
        ref = min(inputs, key=lambda p: p[1].L, default=None)
        tri = ref[1].triple if ref is not None else None
        steering_now = plan is not None and plan.k_start <= k <= plan.k_end
        pose = Pose(ego.x, lat_y, math.atan2(lat_vy, ego.v) if (ego.v or lat_vy) else 0.0)
        seps = tuple(separation(pose, geom.S_f, geom.S_r, geom.B, o.box()) for o in obstacles)
        log.rows.append(
            Row(
                t=t,
                x=ego.x,
                y=lat_y,
                v=ego.v,
                a=ego.a,
                v_y=lat_vy,
                a_y=lat_ay,
                mode=state.label,
                L=ref[1].L if ref is not None else None,
                L_w=tri.L_w if tri is not None and not tri.no_conflict else None,
                L_b=tri.L_b if tri is not None and not tri.no_conflict else None,
                L_s=tri.L_s if tri is not None and not tri.no_conflict else None,
                ttc_inv=ref[1].ttc_inv if ref is not None else None,
                plan=plan.sample(k) if steering_now else None,
                obstacles=tuple((o.x, o.y, o.v, o.spec.lateral_v) for o in obstacles),
                separations=seps,
            )
        )

        if any(s == 0.0 for s in seps):
            log.end_reason = "collision"
            break
        if ego.v == 0.0 and state.mode in BRAKING_MODES:
            log.end_reason = "standstill"
            break
        if t_settle is not None and t >= t_settle - 1e-9:
            log.end_reason = "maneuver-complete"
            break
        if k == k_max:
            log.end_reason = "time-limit"
            break

        # propagate to t + dt
        target = state.a_cmd if state.mode in BRAKING_MODES and state.a_cmd else 0.0
        a_now = brake.achieved if brake.t_engaged is not None else 0.0
        brake = brake.advance(t + dt, target, params)
        ego = step(ego, 0.5 * (a_now + brake.achieved), dt)
        for o in obstacles:
            _advance_obstacle(o, t, dt, ramp)
        if plan is not None and k + 1 >= plan.k_start:
            lat_y, lat_vy, lat_ay, _ = plan.sample(k + 1)
            if k + 1 >= plan.k_end:
                lat_vy = lat_ay = 0.0
    return log


def _combine(inputs, prev: DecisionState, spec: ScenarioSpec, t: float, driver_active: bool, maneuver_done: bool):
    if not inputs:
        inp = RiskInput(math.inf, driver_active=driver_active, maneuver_done=maneuver_done)
        return decide(inp, prev, spec.risk, t)
    states = [decide(inp, prev, spec.risk, t) for _, inp in inputs]
    return most_severe(states[1:], states[0])


def _steer_source(inputs, prev: DecisionState, spec: ScenarioSpec, t: float) -> int:
    """Index of the obstacle whose decision asks for steering; nearest wins ties."""
    best = None
    for i, inp in inputs:
        if decide(inp, prev, spec.risk, t).mode is Mode.EMERGENCY_STEER:
            if best is None or inp.L < best[1]:
                best = (i, inp.L)
    if best is None:
        raise RuntimeError("no obstacle requested steering")
    return best[0]
