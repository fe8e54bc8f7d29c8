"""Built-in invariant and oracle checks, runnable without the test suite."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import lateral_qp as qp
from .drivable_area import collision_hazard_time
from .oracles import hazard_time_by_integration, qp_interior_point, random_lateral_instance
from .output import summary_json, timeseries_csv
from .safety_distance import BrakingParams, ObstacleMotionClass, braking_distance, braking_distance_kmh, safety_triple
from .scenario import load_scenario
from .simulator import run, summarize

REFERENCE_FIXTURES = ("front_car_high", "front_car_low", "pedestrian_high", "pedestrian_low", "oncoming")


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str


def _triple() -> tuple[bool, str]:
    tri = safety_triple(25.0, ObstacleMotionClass.braking(16.7, 7.0), BrakingParams())
    ok = abs(tri.L_b - 75.7) <= 0.2 and abs(tri.L_s - 42.3) <= 0.2
    return ok, f"L_b={tri.L_b:.3f} L_s={tri.L_s:.3f}"


def _units() -> tuple[bool, str]:
    rng = np.random.default_rng(1)
    p = BrakingParams()
    worst = 0.0
    for _ in range(500):
        v = rng.uniform(0, 60)
        a = rng.uniform(0.1, 10)
        si = braking_distance(v, 0.0, a, p)
        kmh = braking_distance_kmh(3.6 * v, 0.0, a, p)
        worst = max(worst, abs(si - kmh) / max(1.0, abs(si)))
    return worst <= 1e-9, f"max rel diff {worst:.2e}"


def _hazard() -> tuple[bool, str]:
    cases = [(25.0, 16.7, -7.0, 26.0), (22.2, 0.0, 0.0, 29.7), (16.7, -16.7, 0.0, 66.7), (20.0, 15.0, -3.0, 10.0)]
    worst = 0.0
    for v, vo, ao, L in cases:
        worst = max(worst, abs(collision_hazard_time(v, vo, ao, L) - hazard_time_by_integration(v, vo, ao, L)))
    return worst <= 1e-3, f"max |dt| {worst:.2e} s"


def _qp(n_instances: int = 40) -> tuple[bool, str]:
    rng = np.random.default_rng(7)
    worst = 0.0
    bad = 0
    for _ in range(n_instances):
        N = int(rng.integers(3, 11))
        lo, hi, w, init = random_lateral_instance(rng, N)
        base = qp.assemble(_Bounds(lo[:, 0], hi[:, 0]), qp.KinematicLimits(), qp.Weights(*w), 0.1)
        prob = qp.QPProblem(N, 0.1, base.H, base.F, base.A, base.b, lo.ravel().copy(), hi.ravel().copy())
        st = qp.LateralState(*init)
        traj = qp.solve(prob, st)
        pp = prob.pinned(st)
        ref = qp_interior_point(pp.H, pp.F, pp.A, pp.b, pp.B_min, pp.B_max)
        if ref is None or not qp.validate(traj, prob, st).ok():
            bad += 1
            continue
        worst = max(worst, abs(traj.objective - ref[1]) / (1 + abs(ref[1])))
    return bad == 0 and worst <= 1e-6, f"{n_instances} instances, worst rel obj diff {worst:.2e}, failures {bad}"


@dataclass(frozen=True)
class _Bounds:
    y_min: np.ndarray
    y_max: np.ndarray


def _fixtures() -> tuple[bool, str]:
    parts = []
    ok = True
    for name in REFERENCE_FIXTURES:
        s = summarize(run(load_scenario(name)))
        ok &= not s.collision
        parts.append(f"{name}:{'collision' if s.collision else 'clear'}")
    return ok, " ".join(parts)


def _determinism() -> tuple[bool, str]:
    spec = load_scenario("front_car_high")
    a, b = run(spec), run(spec)
    same = timeseries_csv(a) == timeseries_csv(b) and summary_json(a) == summary_json(b)
    return same, "repeated run identical" if same else "outputs differ"


CHECKS: tuple[tuple[str, Callable[[], tuple[bool, str]]], ...] = (
    ("safety triple reproduces the front-car distances", _triple),
    ("SI and km/h braking distances agree", _units),
    ("hazard time matches step integration", _hazard),
    ("QP solver matches interior-point reference", _qp),
    ("reference fixtures run collision-free", _fixtures),
    ("runs are deterministic", _determinism),
)


def run_selftest(echo: Callable[[str], None] = print) -> bool:
    all_ok = True
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # report and continue with the remaining checks
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        all_ok &= ok
        echo(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
    return all_ok
