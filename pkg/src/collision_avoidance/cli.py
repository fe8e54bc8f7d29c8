"""Command-line entry point: ``cavoid run | batch | validate | selftest``.

Exit codes: 0 clean run, 1 parse or configuration error, 2 collision detected.
"""

from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .output import DEFAULT_EMIT, EMIT_CHOICES, RunConfig, emit, fmt
from .scenario import ScenarioError, load_scenario
from .simulator import RunOptions, run, summarize

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_COLLISION = 2


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cavoid", description="Emergency collision-avoidance simulator.")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one scenario and write its logs")
    r.add_argument("scenario", help="scenario file, or the name of a bundled fixture")
    r.add_argument("--out", default=None, help="output directory (default: out/<scenario name>)")
    r.add_argument("--dt", type=float, default=None, help="simulation step [s]")
    r.add_argument("--ts", type=float, default=None, help="planner step [s]")
    r.add_argument("--emit", nargs="+", choices=EMIT_CHOICES, default=None,
                   help="files to write (default: timeseries envelope summary)")

    b = sub.add_parser("batch", help="run every scenario in a directory")
    b.add_argument("directory")
    b.add_argument("--out", default="out", help="root output directory")
    b.add_argument("--jobs", type=int, default=1, help="parallel scenario runs")

    v = sub.add_parser("validate", help="parse and validate a scenario without running it")
    v.add_argument("scenario")

    sub.add_parser("selftest", help="run the built-in invariant and oracle checks")
    return ap


def _run_one(path: str, out_dir: Path | None, dt, ts, emit_flags) -> tuple[str, dict | None, str | None]:
    """Run a scenario and emit its files; returns ``(name, summary row, error)``."""
    try:
        spec = load_scenario(path)
        config = RunConfig(Path(path), out_dir or Path("out") / spec.name, dt, ts,
                           emit=frozenset(emit_flags or DEFAULT_EMIT))
        log = run(spec, RunOptions(config.dt, config.T_s))
    except (ScenarioError, ValueError) as exc:
        return Path(path).stem, None, str(exc)
    emit(log, config)
    s = summarize(log)
    row = {
        "scenario": spec.name,
        "collision": s.collision,
        "min_gap": s.min_gap,
        "final_gap": s.final_gap,
        "max_abs_ay": s.max_abs_ay,
        "impact_speed": s.impact_speed,
        "final_mode": s.timeline[-1][1],
        "end_reason": log.end_reason,
    }
    return spec.name, row, None


def _cmd_run(args) -> int:
    name, row, err = _run_one(args.scenario, Path(args.out) if args.out else None, args.dt, args.ts, args.emit)
    if err is not None:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{name}: {row['end_reason']}, collision={str(row['collision']).lower()}, "
          f"min_gap={fmt(row['min_gap'])} m, final_gap={fmt(row['final_gap']) or '-'} m")
    return EXIT_COLLISION if row["collision"] else EXIT_OK


def _cmd_batch(args) -> int:
    root = Path(args.directory)
    if not root.is_dir():
        print(f"error: {root} is not a directory", file=sys.stderr)
        return EXIT_CONFIG
    files = sorted(p for p in root.glob("*.json") if not p.name.startswith("_"))
    out = Path(args.out)
    jobs = [(str(p), out / p.stem, None, None, None) for p in files]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one, *zip(*jobs))) if jobs else []
    else:
        results = [_run_one(*j) for j in jobs]

    out.mkdir(parents=True, exist_ok=True)
    cols = ["scenario", "collision", "min_gap", "final_gap", "max_abs_ay", "impact_speed", "final_mode", "end_reason"]
    code = EXIT_OK
    with open(out / "batch_summary.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols + ["error"])
        for name, row, err in results:
            if err is not None:
                print(f"{name}: error: {err}", file=sys.stderr)
                w.writerow([name] + [""] * (len(cols) - 1) + [err])
                code = EXIT_CONFIG
                continue
            cells = [row[c] if isinstance(row[c], str) else
                     (str(row[c]).lower() if isinstance(row[c], bool) else fmt(row[c])) for c in cols]
            w.writerow(cells + [""])
            print(f"{name}: {row['end_reason']}, collision={str(row['collision']).lower()}")
            if row["collision"] and code == EXIT_OK:
                code = EXIT_COLLISION
    return code


def _cmd_validate(args) -> int:
    try:
        spec = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{spec.name}: ok ({len(spec.obstacles)} obstacle(s))")
    return EXIT_OK


def _cmd_selftest(args) -> int:
    from .selftest import run_selftest

    return EXIT_OK if run_selftest() else EXIT_CONFIG


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    handler = {"run": _cmd_run, "batch": _cmd_batch, "validate": _cmd_validate, "selftest": _cmd_selftest}
    return handler[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
