"""Brake build-up profile and longitudinal ego propagation."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .safety_distance import BrakingParams


@dataclass(frozen=True)
class LongitudinalState:
    x: float
    v: float
    a: float = 0.0  # achieved acceleration, <= 0 while braking

    def __post_init__(self) -> None:
        if self.v < 0:
            raise ValueError("v must be >= 0")


def command_response(t_since_command: float, a_target: float, params: BrakingParams) -> float:
    """Deceleration magnitude reached ``t_since_command`` seconds after a fresh brake request.

    Dead time ``tau1``, a linear build-up over ``tau2``, then hold.
    """
    if a_target <= 0:
        raise ValueError("a_target must be > 0")
    t = t_since_command - params.tau1
    if t < 0:
        return 0.0
    if params.tau2 == 0 or t >= params.tau2:
        return a_target
    return a_target * t / params.tau2


@dataclass(frozen=True)
class BrakeActuator:
    """Achieved deceleration under a (possibly escalating) target.

    The first request starts the dead time. A later, larger target continues
    the build-up from the achieved value at slope ``target / tau2`` with no
    second dead time.
    """

    t_engaged: float | None = None
    t_last: float = 0.0
    achieved: float = 0.0
    target: float = 0.0

    def advance(self, t: float, target: float, params: BrakingParams) -> "BrakeActuator":
        if target <= 0:
            return BrakeActuator(t_last=t)
        if self.t_engaged is None:
            if t < self.t_last:
                raise ValueError("time went backwards")
            fresh = BrakeActuator(t_engaged=self.t_last, t_last=self.t_last, target=target)
            return fresh.advance(t, target, params)

        start = max(self.t_last, self.t_engaged + params.tau1)
        a = self.achieved
        if t > start:
            if params.tau2 == 0:
                a = target
            else:
                slope = target / params.tau2
                if a < target:
                    a = min(target, a + slope * (t - start))
                else:
                    a = max(target, a - slope * (t - start))
        return replace(self, t_last=t, achieved=a, target=target)


def step(state: LongitudinalState, achieved_decel: float, dt: float) -> LongitudinalState:
    """Advance by ``dt`` under deceleration magnitude ``achieved_decel``.

    Velocity is clamped at standstill; if the stop happens inside the step the
    exact stopping distance is used instead of the trapezoid.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    v0 = state.v
    if v0 <= 0:
        return LongitudinalState(state.x, 0.0, 0.0)
    v1 = v0 - achieved_decel * dt
    if v1 <= 0:
        return LongitudinalState(state.x + v0**2 / (2 * achieved_decel), 0.0, 0.0)
    return LongitudinalState(state.x + 0.5 * (v0 + v1) * dt, v1, -achieved_decel)


def simulate_stop(v0: float, a_target: float, params: BrakingParams, dt: float = 1e-3) -> float:
    """Stopping distance from ``v0`` by stepping the build-up profile at ``dt``."""
    state = LongitudinalState(0.0, v0)
    t = 0.0
    while state.v > 0:
        # trapezoid in deceleration: exact for the piecewise-linear profile
        a0 = command_response(t, a_target, params)
        a1 = command_response(t + dt, a_target, params)
        state = step(state, 0.5 * (a0 + a1), dt)
        t += dt
        if t > 1e4:
            raise RuntimeError("vehicle did not stop")
    return state.x
