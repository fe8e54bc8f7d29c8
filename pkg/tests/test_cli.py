import csv
import json
import shutil

import pytest

from collision_avoidance.cli import EXIT_COLLISION, EXIT_CONFIG, EXIT_OK, main
from collision_avoidance.scenario import FIXTURE_DIR


def read(path):
    return path.read_bytes()


def test_run_writes_outputs(tmp_path):
    out = tmp_path / "run"
    assert main(["run", "front_car_high", "--out", str(out), "--emit", "timeseries", "envelope", "summary", "qp_dump"]) == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert summary["collision"] is False
    assert summary["timeline"][1][1] == "EmergencySteer"
    with open(out / "timeseries.csv", newline="") as fh:
        header = next(csv.reader(fh))
    assert header[:15] == ["t", "x", "y", "v", "a", "mode", "L", "L_w", "L_b", "L_s", "ttc_inv",
                           "y_plan", "vy_plan", "ay_plan", "jy_plan"]
    assert header[15:17] == ["obs0_x", "obs0_y"]
    qp = json.loads((out / "qp.json").read_text())
    rows = (out / "envelope.csv").read_text().splitlines()
    assert len(rows) - 1 == qp["N_end"]


def test_outputs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "pedestrian_high", "--out", str(a)]) == EXIT_OK
    assert main(["run", "pedestrian_high", "--out", str(b)]) == EXIT_OK
    for name in ("timeseries.csv", "envelope.csv", "summary.json"):
        assert read(a / name) == read(b / name)
        assert b"\r\n" not in read(a / name)


def test_low_risk_summary(tmp_path):
    out = tmp_path / "low"
    assert main(["run", "pedestrian_low", "--out", str(out)]) == EXIT_OK
    s = json.loads((out / "summary.json").read_text())
    assert s["collision"] is False and s["final_gap"] > 0 and s["final_v"] == 0
    # no steering plan: envelope has only a header
    assert (out / "envelope.csv").read_text() == "step,t,y_min,y_max\n"


def test_collision_exit_code(tmp_path):
    assert main(["run", "front_car_infeasible", "--out", str(tmp_path / "x")]) == EXIT_COLLISION


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"ego": {"v0": "90 km/h"}, "obstacles": []}')
    assert main(["run", str(bad), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "ego.v0: non-SI unit" in capsys.readouterr().err
    assert main(["validate", str(bad)]) == EXIT_CONFIG
    assert main(["run", "front_car_high", "--dt", "0.03", "--out", str(tmp_path / "p")]) == EXIT_CONFIG


def test_validate_ok(capsys):
    assert main(["validate", "oncoming"]) == EXIT_OK
    assert "oncoming: ok" in capsys.readouterr().out


def test_unknown_emit_flag_rejected():
    with pytest.raises(SystemExit):
        main(["run", "oncoming", "--emit", "plots"])


def test_batch(tmp_path):
    src = tmp_path / "scen"
    src.mkdir()
    for name in ("_defaults.json", "oncoming.json", "pedestrian_low.json"):
        shutil.copy(FIXTURE_DIR / name, src / name)
    out = tmp_path / "out"
    assert main(["batch", str(src), "--out", str(out)]) == EXIT_OK
    with open(out / "batch_summary.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["scenario"] for r in rows] == ["oncoming", "pedestrian_low"]
    assert all(r["collision"] == "false" for r in rows)
    assert (out / "oncoming" / "timeseries.csv").exists()


def test_batch_parallel_matches_serial(tmp_path):
    src = tmp_path / "scen"
    src.mkdir()
    for name in ("_defaults.json", "oncoming.json", "pedestrian_low.json"):
        shutil.copy(FIXTURE_DIR / name, src / name)
    assert main(["batch", str(src), "--out", str(tmp_path / "s")]) == EXIT_OK
    assert main(["batch", str(src), "--out", str(tmp_path / "p"), "--jobs", "2"]) == EXIT_OK
    assert read(tmp_path / "s" / "batch_summary.csv") == read(tmp_path / "p" / "batch_summary.csv")


def test_batch_missing_dir(tmp_path):
    assert main(["batch", str(tmp_path / "nope")]) == EXIT_CONFIG


def test_selftest_passes(capsys):
    assert main(["selftest"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("PASS") == 6 and "FAIL" not in out
