"""Run configuration and the CSV / JSON writers.

Numbers are written with 6 significant digits, ``.`` as decimal separator and
``\\n`` line endings; a missing value is an empty CSV cell or JSON ``null``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .simulator import SimLog, Summary, summarize

EMIT_CHOICES = ("timeseries", "envelope", "summary", "qp_dump")
DEFAULT_EMIT = frozenset({"timeseries", "envelope", "summary"})


@dataclass(frozen=True)
class RunConfig:
    scenario: Path
    out_dir: Path = Path("out")
    dt: float | None = None
    T_s: float | None = None
    deterministic: bool = True  # reserved: runs have no random inputs
    emit: frozenset[str] = field(default=DEFAULT_EMIT)

    def __post_init__(self) -> None:
        unknown = set(self.emit) - set(EMIT_CHOICES)
        if unknown:
            raise ValueError(f"unknown emit flag(s): {', '.join(sorted(unknown))}")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.T_s is not None and self.T_s <= 0:
            raise ValueError("T_s must be > 0")
        if self.dt is not None and self.T_s is not None:
            ratio = self.T_s / self.dt
            if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
                raise ValueError(f"dt={self.dt:g} must divide T_s={self.T_s:g}")


def fmt(x: float | None) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = f"{x:.6g}"
    return "0" if s == "-0" else s


def _num(x: float | None):
    """JSON value rounded to 6 significant digits."""
    if x is None or not math.isfinite(x):
        return None
    return float(fmt(x))


def timeseries_header(n_obstacles: int) -> list[str]:
    cols = ["t", "x", "y", "v", "a", "mode", "L", "L_w", "L_b", "L_s", "ttc_inv",
            "y_plan", "vy_plan", "ay_plan", "jy_plan"]
    for i in range(n_obstacles):
        cols += [f"obs{i}_x", f"obs{i}_y", f"obs{i}_v"]
    return cols


def timeseries_csv(log: SimLog) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    n_obs = len(log.rows[0].obstacles) if log.rows else 0
    w.writerow(timeseries_header(n_obs))
    for r in log.rows:
        plan = r.plan if r.plan is not None else (None,) * 4
        cells = [r.t, r.x, r.y, r.v, r.a, r.mode, r.L, r.L_w, r.L_b, r.L_s, r.ttc_inv, *plan]
        for ox, oy, ov, _ in r.obstacles:
            cells += [ox, oy, ov]
        w.writerow([c if isinstance(c, str) else fmt(c) for c in cells])
    return buf.getvalue()


def envelope_csv(log: SimLog) -> str:
    """Envelope per planner step, in the road frame (header only when no plan was made)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "t", "y_min", "y_max"])
    plan = log.plan
    if plan is not None:
        env = plan.envelope
        d = plan.direction
        t0 = plan.k_start * log.dt
        for k in range(env.N_end):
            lo, hi = sorted((d * float(env.y_min[k]), d * float(env.y_max[k])))
            w.writerow([k, fmt(t0 + k * env.T_s), fmt(lo), fmt(hi)])
    return buf.getvalue()


def summary_dict(log: SimLog, summary: Summary | None = None) -> dict:
    s = summary or summarize(log)
    return {
        "scenario": log.name,
        "collision": s.collision,
        "min_gap": _num(s.min_gap),
        "final_gap": _num(s.final_gap),
        "max_abs_ay": _num(s.max_abs_ay),
        "timeline": [[_num(t), m] for t, m in s.timeline],
        "impact_speed": _num(s.impact_speed),
        "final_v": _num(s.final_v),
        "duration": _num(s.duration),
        "end_reason": log.end_reason,
        "planner_error": log.planner_error,
    }


def summary_json(log: SimLog) -> str:
    return json.dumps(summary_dict(log), indent=2) + "\n"


def qp_dump_json(log: SimLog) -> str:
    """Full-precision QP data and solution of the executed plan (``{}`` without a plan)."""
    plan = log.plan
    if plan is None:
        return "{}\n"
    p = plan.problem
    data = {
        "N_end": p.N_end,
        "T_s": p.T_s,
        "direction": plan.direction,
        "H": p.H.tolist(),
        "F": p.F.tolist(),
        "A": p.A.tolist(),
        "b": p.b.tolist(),
        "B_min": p.B_min.tolist(),
        "B_max": p.B_max.tolist(),
        "Y": plan.trajectory.Y.ravel().tolist(),
        "objective": plan.trajectory.objective,
    }
    return json.dumps(data) + "\n"


_WRITERS = {
    "timeseries": ("timeseries.csv", timeseries_csv),
    "envelope": ("envelope.csv", envelope_csv),
    "summary": ("summary.json", summary_json),
    "qp_dump": ("qp.json", qp_dump_json),
}


def emit(log: SimLog, config: RunConfig) -> list[Path]:
    """Write the requested files into ``config.out_dir``; returns the written paths."""
    out = Path(config.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror}") from exc
    written = []
    for key in EMIT_CHOICES:
        if key not in config.emit:
            continue
        name, writer = _WRITERS[key]
        path = out / name
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(writer(log))
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror}") from exc
        written.append(path)
    return written
