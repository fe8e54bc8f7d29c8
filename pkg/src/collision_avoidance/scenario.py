"""Scenario description files: typed spec, parsing with validation, serialization.

Files are JSON. A top-level ``include`` names one or more files (relative to
the including file) whose trees are deep-merged underneath the current one,
so calibration constants can live in a shared defaults file. Numeric fields
take either a bare number in SI units or a string such as ``"25 m/s"``; any
other unit is rejected.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

from .drivable_area import EgoGeometry
from .lateral_qp import Weights
from .risk_decision import Thresholds
from .safety_distance import BrakingParams

FIXTURE_DIR = Path(__file__).with_name("fixtures")


class ScenarioError(ValueError):
    """Invalid scenario document; the message starts with the offending path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass(frozen=True)
class Gate:
    """Condition on the gap (ego front to obstacle near face) or on elapsed time."""

    kind: str  # "gap" or "time"
    value: float

    def reached(self, t: float, gap: float) -> bool:
        if self.kind == "time":
            return t >= self.value
        return gap <= self.value


@dataclass(frozen=True)
class ObstacleSpec:
    kind: str
    length: float
    width: float
    x0: float  # initial gap from the ego front end to the near face
    y0: float = 0.0  # lateral centre, road frame
    v: float = 0.0
    a: float = 0.0  # applied once ``trigger`` fires (immediately without one)
    lateral_v: float = 0.0
    trigger: Gate | None = None
    visible_from: Gate | None = None


@dataclass(frozen=True)
class EgoSpec:
    v0: float
    geometry: EgoGeometry = EgoGeometry()
    params: BrakingParams = BrakingParams()
    y0: float = 0.0


@dataclass(frozen=True)
class RoadSpec:
    W: float = 3.5  # lane-change lateral target
    mu: float = 0.7
    delta_y: float = 0.2  # terminal band half-width


@dataclass(frozen=True)
class PlannerSpec:
    T_s: float = 0.05
    merge_margin: float = 1.5
    kappa: float = 1.1
    weights: Weights = Weights()
    a_y_frac: float = 0.4
    j_max: float = 10.0
    evade_direction: int = 1


@dataclass(frozen=True)
class SimSpec:
    dt: float = 0.01
    t_max: float = 30.0
    settle_time: float = 1.0
    driver_override_at: float | None = None
    disable_system: bool = False


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    ego: EgoSpec
    obstacles: tuple[ObstacleSpec, ...]
    road: RoadSpec = RoadSpec()
    risk: Thresholds = Thresholds()
    planner: PlannerSpec = PlannerSpec()
    sim: SimSpec = SimSpec()


# ---------------------------------------------------------------- field table


@dataclass(frozen=True)
class _Num:
    unit: str
    check: Callable[[float], bool] | None = None
    rule: str = ""
    required: bool = False
    nullable: bool = False


def _pos(unit: str, **kw) -> _Num:
    return _Num(unit, lambda x: x > 0, "must be > 0", **kw)


def _nonneg(unit: str, **kw) -> _Num:
    return _Num(unit, lambda x: x >= 0, "must be >= 0", **kw)


def _any(unit: str, **kw) -> _Num:
    return _Num(unit, None, "", **kw)


_GEOMETRY = {"B": _pos("m"), "S_f": _pos("m"), "S_r": _nonneg("m"), "v_y_max": _pos("m/s")}
_PARAMS = {
    "tau1": _nonneg("s"),
    "tau2": _nonneg("s"),
    "t_driver": _nonneg("s"),
    "a_trigger": _pos("m/s^2"),
    "a_max_cap": _pos("m/s^2"),
    "clamp_to_adhesion": bool,
}
_EGO = {"v0": _pos("m/s", required=True), "y0": _any("m"), "geometry": _GEOMETRY, "params": _PARAMS}
_ROAD = {
    "W": _pos("m"),
    "mu": _Num("", lambda x: 0 < x <= 1.2, "must be in (0, 1.2]"),
    "delta_y": _nonneg("m"),
}
_GATE = {"gap": _pos("m"), "time": _nonneg("s")}
_OBSTACLE = {
    "kind": str,
    "footprint": {"length": _pos("m", required=True), "width": _pos("m", required=True)},
    "x0": _pos("m", required=True),
    "y0": _any("m"),
    "v": _any("m/s"),
    "a": _any("m/s^2"),
    "lateral_v": _any("m/s"),
    "trigger": _GATE,
    "visible_from": _GATE,
}
_RISK = {"ttc_war_inv": _pos("1/s"), "ttc_str_inv": _pos("1/s")}
_PLANNER = {
    "T_s": _pos("s"),
    "merge_margin": _nonneg("s"),
    "kappa": _pos(""),
    "weights": {"p": _nonneg(""), "q": _nonneg(""), "r": _nonneg("")},
    "a_y_frac": _Num("", lambda x: 0 < x <= 1, "must be in (0, 1]"),
    "j_max": _pos("m/s^3"),
    "evade_direction": int,
}
_SIM = {
    "dt": _pos("s"),
    "t_max": _pos("s"),
    "settle_time": _nonneg("s"),
    "driver_override_at": _nonneg("s", nullable=True),
    "disable_system": bool,
}
_TOP = {
    "name": str,
    "ego": _EGO,
    "road": _ROAD,
    "obstacles": [_OBSTACLE],
    "risk": _RISK,
    "planner": _PLANNER,
    "sim": _SIM,
}

_UNIT_ALIASES = {"m/s²": "m/s^2", "m/s2": "m/s^2", "m/s³": "m/s^3", "m/s3": "m/s^3", "s^-1": "1/s"}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S*)\s*$")


def _join(path: str, key: str) -> str:
    return f"{path}.{key}" if path else key


def _number(value: Any, spec: _Num, path: str) -> float | None:
    if value is None:
        if spec.nullable:
            return None
        raise ScenarioError(path, "must be a number")
    if isinstance(value, bool):
        raise ScenarioError(path, "must be a number")
    if isinstance(value, str):
        m = _QUANTITY.match(value)
        if not m:
            raise ScenarioError(path, f"cannot read quantity {value!r}")
        unit = _UNIT_ALIASES.get(m.group(2), m.group(2))
        if unit != spec.unit:
            expected = spec.unit or "no unit"
            raise ScenarioError(path, f"non-SI unit {m.group(2)!r} (expected {expected})")
        value = float(m.group(1))
    if not isinstance(value, (int, float)):
        raise ScenarioError(path, "must be a number")
    x = float(value)
    if not math.isfinite(x):
        raise ScenarioError(path, "must be finite")
    if spec.check is not None and not spec.check(x):
        raise ScenarioError(path, spec.rule)
    return x


def _check_tree(node: Any, schema: Any, path: str) -> Any:
    """Validate ``node`` against ``schema`` and return a normalised copy."""
    if isinstance(schema, dict):
        if not isinstance(node, dict):
            raise ScenarioError(path, "must be an object")
        unknown = sorted(set(node) - set(schema))
        if unknown:
            raise ScenarioError(_join(path, unknown[0]), "unknown key")
        out = {}
        for key, sub in schema.items():
            sub_path = _join(path, key)
            if key not in node:
                if isinstance(sub, _Num) and sub.required:
                    raise ScenarioError(sub_path, "missing")
                continue
            out[key] = _check_tree(node[key], sub, sub_path)
        return out
    if isinstance(schema, list):
        if not isinstance(node, list):
            raise ScenarioError(path, "must be a list")
        return [_check_tree(item, schema[0], f"{path}[{i}]") for i, item in enumerate(node)]
    if isinstance(schema, _Num):
        return _number(node, schema, path)
    if schema is bool:
        if not isinstance(node, bool):
            raise ScenarioError(path, "must be true or false")
        return node
    if schema is int:
        if isinstance(node, bool) or not isinstance(node, int):
            raise ScenarioError(path, "must be an integer")
        return node
    if schema is str:
        if not isinstance(node, str):
            raise ScenarioError(path, "must be a string")
        return node
    raise TypeError(f"bad schema at {path}")


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for key, value in over.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _resolve_includes(tree: dict, base_dir: Path | None, seen: tuple[Path, ...] = ()) -> dict:
    inc = tree.pop("include", None)
    if inc is None:
        return tree
    names = [inc] if isinstance(inc, str) else inc
    if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
        raise ScenarioError("include", "must be a file name or a list of file names")
    merged: dict = {}
    for name in names:
        path = ((base_dir or Path.cwd()) / name).resolve()
        if path in seen:
            raise ScenarioError("include", f"circular include of {path}")
        try:
            sub = json.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ScenarioError("include", f"cannot read {path}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ScenarioError("include", f"{path}: invalid JSON ({exc.msg}, line {exc.lineno})") from exc
        if not isinstance(sub, dict):
            raise ScenarioError("include", f"{path}: top level must be an object")
        merged = _merge(merged, _resolve_includes(sub, path.parent, seen + (path,)))
    return _merge(merged, tree)


def _gate(node: dict | None, path: str) -> Gate | None:
    if node is None:
        return None
    if len(node) != 1:
        raise ScenarioError(path, "give exactly one of 'gap' or 'time'")
    (kind, value), = node.items()
    return Gate(kind, value)


def _build(tree: dict, default_name: str) -> ScenarioSpec:
    if "ego" not in tree:
        raise ScenarioError("ego", "missing")
    if "obstacles" not in tree:
        raise ScenarioError("obstacles", "missing")
    if not tree["obstacles"]:
        raise ScenarioError("obstacles", "need at least one obstacle")

    road_t = tree.get("road", {})
    road = RoadSpec(**road_t)

    ego_t = tree["ego"]
    try:
        geometry = EgoGeometry(**ego_t.get("geometry", {}))
    except ValueError as exc:
        raise ScenarioError("ego.geometry", str(exc)) from exc
    try:
        params = BrakingParams(**ego_t.get("params", {}), mu=road.mu)
    except ValueError as exc:
        raise ScenarioError("ego.params", str(exc)) from exc
    ego = EgoSpec(ego_t["v0"], geometry, params, ego_t.get("y0", 0.0))

    obstacles = []
    for i, o in enumerate(tree["obstacles"]):
        path = f"obstacles[{i}]"
        if "footprint" not in o:
            raise ScenarioError(_join(path, "footprint"), "missing")
        obstacles.append(
            ObstacleSpec(
                kind=o.get("kind", "car"),
                length=o["footprint"]["length"],
                width=o["footprint"]["width"],
                x0=o["x0"],
                y0=o.get("y0", 0.0),
                v=o.get("v", 0.0),
                a=o.get("a", 0.0),
                lateral_v=o.get("lateral_v", 0.0),
                trigger=_gate(o.get("trigger"), _join(path, "trigger")),
                visible_from=_gate(o.get("visible_from"), _join(path, "visible_from")),
            )
        )

    risk = Thresholds(**tree.get("risk", {}))
    if risk.ttc_war_inv > risk.ttc_str_inv:
        raise ScenarioError("risk.ttc_war_inv", "must not exceed risk.ttc_str_inv")

    pl = dict(tree.get("planner", {}))
    if "weights" in pl:
        pl["weights"] = Weights(**pl["weights"])
    if pl.get("evade_direction", 1) not in (1, -1):
        raise ScenarioError("planner.evade_direction", "must be 1 or -1")
    planner = PlannerSpec(**pl)

    sim = SimSpec(**tree.get("sim", {}))
    steps = planner.T_s / sim.dt
    if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
        raise ScenarioError("sim.dt", f"must divide planner.T_s={planner.T_s:g}")

    return ScenarioSpec(
        name=tree.get("name", default_name),
        ego=ego,
        obstacles=tuple(obstacles),
        road=road,
        risk=risk,
        planner=planner,
        sim=sim,
    )


def parse_scenario(text: str, base_dir: str | Path | None = None, default_name: str = "scenario") -> ScenarioSpec:
    """Parse and validate a scenario document.

    An empty document is treated as an empty object so that the first
    missing required field is reported.
    """
    if text.strip():
        try:
            tree = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError("", f"invalid JSON ({exc.msg}, line {exc.lineno})") from exc
    else:
        tree = {}
    if not isinstance(tree, dict):
        raise ScenarioError("", "top level must be an object")
    tree = _resolve_includes(dict(tree), Path(base_dir) if base_dir is not None else None)
    checked = _check_tree(tree, _TOP, "")
    return _build(checked, default_name)


def load_scenario(path: str | Path) -> ScenarioSpec:
    """Read a scenario file; a bare name falls back to the bundled fixtures."""
    p = Path(path)
    if not p.exists():
        candidate = FIXTURE_DIR / (p.name if p.suffix else p.name + ".json")
        if candidate.exists():
            p = candidate
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError("", f"cannot read {p}: {exc.strerror}") from exc
    return parse_scenario(text, base_dir=p.parent, default_name=p.stem)


def _gate_dict(g: Gate | None) -> dict | None:
    return None if g is None else {g.kind: g.value}


def scenario_to_dict(spec: ScenarioSpec) -> dict:
    """Self-contained tree (no includes) that parses back to an equal spec."""
    p = spec.ego.params
    obstacles = []
    for o in spec.obstacles:
        d = {
            "kind": o.kind,
            "footprint": {"length": o.length, "width": o.width},
            "x0": o.x0,
            "y0": o.y0,
            "v": o.v,
            "a": o.a,
            "lateral_v": o.lateral_v,
        }
        if o.trigger is not None:
            d["trigger"] = _gate_dict(o.trigger)
        if o.visible_from is not None:
            d["visible_from"] = _gate_dict(o.visible_from)
        obstacles.append(d)
    w = spec.planner.weights
    return {
        "name": spec.name,
        "ego": {
            "v0": spec.ego.v0,
            "y0": spec.ego.y0,
            "geometry": {
                "B": spec.ego.geometry.B,
                "S_f": spec.ego.geometry.S_f,
                "S_r": spec.ego.geometry.S_r,
                "v_y_max": spec.ego.geometry.v_y_max,
            },
            "params": {
                "tau1": p.tau1,
                "tau2": p.tau2,
                "t_driver": p.t_driver,
                "a_trigger": p.a_trigger,
                "a_max_cap": p.a_max_cap,
                "clamp_to_adhesion": p.clamp_to_adhesion,
            },
        },
        "road": {"W": spec.road.W, "mu": spec.road.mu, "delta_y": spec.road.delta_y},
        "obstacles": obstacles,
        "risk": {"ttc_war_inv": spec.risk.ttc_war_inv, "ttc_str_inv": spec.risk.ttc_str_inv},
        "planner": {
            "T_s": spec.planner.T_s,
            "merge_margin": spec.planner.merge_margin,
            "kappa": spec.planner.kappa,
            "weights": {"p": float(w.p), "q": float(w.q), "r": float(w.r)},
            "a_y_frac": spec.planner.a_y_frac,
            "j_max": spec.planner.j_max,
            "evade_direction": spec.planner.evade_direction,
        },
        "sim": {
            "dt": spec.sim.dt,
            "t_max": spec.sim.t_max,
            "settle_time": spec.sim.settle_time,
            "driver_override_at": spec.sim.driver_override_at,
            "disable_system": spec.sim.disable_system,
        },
    }


def serialize_scenario(spec: ScenarioSpec) -> str:
    return json.dumps(scenario_to_dict(spec), indent=2) + "\n"
