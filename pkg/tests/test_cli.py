import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from vinebot import io
from vinebot.cli import main
from vinebot.core import CalibrationTrial, synthetic_trials

DATA = Path(__file__).resolve().parents[1] / "data"
LAB = str(DATA / "lab_pipe.json")
FIELD = str(DATA / "field_pipe.json")
AREA = math.pi * 0.044**2


def run(*argv):
    return main([str(a) for a in argv])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_calibrate_recovers(tmp_path, capsys):
    io.write_trials(tmp_path / "t.csv", synthetic_trials(0.503, 2.52, AREA, [0, 4, 8, 12]))
    assert run("--out", tmp_path, "calibrate", tmp_path / "t.csv") == 0
    res = json.loads((tmp_path / "calibration.json").read_text())
    assert res["C"] == pytest.approx(0.503, rel=1e-6)
    assert res["f_eversion_N"] == pytest.approx(2.52, rel=1e-6)
    assert "C = 0.503" in capsys.readouterr().out


def test_calibrate_two_points_zero_residual(tmp_path):
    io.write_trials(tmp_path / "t.csv", [CalibrationTrial(1, 1000.0), CalibrationTrial(3, 2000.0)])
    assert run("calibrate", tmp_path / "t.csv", "--area", 0.01, "--out", tmp_path) == 0
    assert json.loads((tmp_path / "calibration.json").read_text())["rms_residual_Pa"] == pytest.approx(0, abs=1e-9)


def test_calibrate_constant_loads_exit_code(tmp_path, capsys):
    io.write_trials(tmp_path / "t.csv", [CalibrationTrial(5, 1000.0), CalibrationTrial(5, 1010.0)])
    assert run("calibrate", tmp_path / "t.csv", "--out", tmp_path) == 3
    assert "degenerate" in capsys.readouterr().err
    assert not (tmp_path / "calibration.json").exists()


def test_calibrate_bad_row(tmp_path, capsys):
    (tmp_path / "t.csv").write_text("load_N,pressure_Pa\n1,1000\n2,abc\n")
    assert run("calibrate", tmp_path / "t.csv", "--out", tmp_path) == 2
    assert "t.csv:3:" in capsys.readouterr().err


def test_missing_input_file(tmp_path, capsys):
    assert run("calibrate", tmp_path / "nope.csv", "--out", tmp_path) == 2
    assert "not found" in capsys.readouterr().err


def _sweep(path):
    rows = read_csv(path)
    assert rows[0] == ["load_N", "pressure_Pa", "mount_kind"]
    out = {}
    for load, p, kind in rows[1:]:
        out.setdefault(kind, {})[float(load)] = float(p)
    return out


def test_sweep_ordering(tmp_path):
    assert run("sweep-mounts", "--loads", "2,3,4,5,6,7,8,9,10,11,12", "--tuned", 12, "--out", tmp_path) == 0
    curves = _sweep(tmp_path / "sweep.csv")
    for load in range(2, 12):
        assert curves["none"][load] <= curves["adaptive"][load] <= curves["constant"][load]
    top = [curves[k][12.0] for k in ("none", "constant", "adaptive")]
    assert max(top) - min(top) < 1e-6  # W = 0 here


def test_sweep_convergence_with_weight(tmp_path):
    w = 0.5
    assert run("sweep-mounts", "--loads", "11.5", "--w-axial", w, "--out", tmp_path) == 0
    curves = _sweep(tmp_path / "sweep.csv")
    vals = [curves[k][11.5] for k in ("none", "constant", "adaptive")]
    assert max(vals) - min(vals) <= w / (0.5 * AREA)


def test_sweep_empty_grid(tmp_path):
    assert run("sweep-mounts", "--loads", "", "--out", tmp_path) == 0
    assert (tmp_path / "sweep.csv").read_text() == "load_N,pressure_Pa,mount_kind\n"


def test_sweep_invalid_mount(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"mounts": {"constant": {"kind": "constant", "f_coupling_max": -3}}}))
    assert run("sweep-mounts", "--config", cfg, "--out", tmp_path) == 2
    assert "mounts.constant" in capsys.readouterr().err
    cfg.write_text(json.dumps({"loadz": [1]}))
    assert run("sweep-mounts", "--config", cfg, "--out", tmp_path) == 2


def test_simulate_lab_reaches_end(tmp_path):
    assert run("simulate", LAB, "--p-max", 10000, "--out", tmp_path) == 0
    summary = json.loads((tmp_path / "trace_summary.json").read_text())
    assert summary["status"] == "complete"
    assert summary["max_reachable_length_m"] == pytest.approx(4.57)
    rows = read_csv(tmp_path / "trace.csv")
    assert rows[0] == ["length_m", "t_tail_N", "f_load_N", "pressure_Pa"]
    assert float(rows[-1][0]) == pytest.approx(4.57)


def test_simulate_pmax_below_start(tmp_path):
    assert run("simulate", LAB, "--p-max", 50, "--out", tmp_path) == 0
    assert read_csv(tmp_path / "trace.csv") == [["length_m", "t_tail_N", "f_load_N", "pressure_Pa"]]
    summary = json.loads((tmp_path / "trace_summary.json").read_text())
    assert summary["status"] == "pressure_limit" and summary["max_reachable_length_m"] == 0.0


def test_simulate_robot_unknown_key(tmp_path, capsys):
    robot = tmp_path / "r.json"
    robot.write_text(json.dumps({"wheels": 4}))
    assert run("simulate", LAB, "--robot", robot, "--out", tmp_path) == 2
    assert "wheels" in capsys.readouterr().err


def _tree(d):
    return {p.name: p.read_bytes() for p in sorted(Path(d).iterdir())}


@pytest.mark.parametrize("cmd", [["simulate", LAB, "--synth-logs"], ["synth-logs", FIELD]])
def test_same_seed_same_bytes(tmp_path, cmd):
    assert run(*cmd, "--seed", 7, "--out", tmp_path / "a") == 0
    assert run(*cmd, "--seed", 7, "--out", tmp_path / "b") == 0
    a, b = _tree(tmp_path / "a"), _tree(tmp_path / "b")
    assert a == b and "log.csv" in a
    assert run(*cmd, "--seed", 8, "--out", tmp_path / "c") == 0
    assert _tree(tmp_path / "c")["log.csv"] != a["log.csv"]


def test_reconstruct_noise_free_lab(tmp_path):
    assert run("synth-logs", LAB, "--noise", "none", "--out", tmp_path) == 0
    assert run("reconstruct", tmp_path / "log.csv", tmp_path / "markers.csv", "--ground-truth", LAB,
               "--out", tmp_path) == 0
    m = json.loads((tmp_path / "metrics.json").read_text())
    assert m["max_orientation_dev_rad"] < 1e-6 and m["length_dev_m"] < 1e-6
    assert run("score", tmp_path / "polyline.csv", tmp_path / "truth.csv", "--out", tmp_path) == 0
    m = json.loads((tmp_path / "metrics.json").read_text())
    assert m["max_orientation_dev_rad"] < 1e-6 and m["length_dev_m"] < 1e-6


def test_reconstruct_field_listing(tmp_path, capsys):
    assert run("synth-logs", FIELD, "--noise", "none", "--out", tmp_path) == 0
    assert run("reconstruct", tmp_path / "log.csv", tmp_path / "markers.csv", "--out", tmp_path) == 0
    segs = json.loads((tmp_path / "segments.json").read_text())
    assert [s["kind"] for s in segs] == ["straight", "straight", "elbow", "straight"]
    assert segs[0]["vertical"] and segs[0]["length_m"] == pytest.approx(3.6)
    assert segs[1]["length_m"] == pytest.approx(4.5) and segs[1]["depression_deg"] == pytest.approx(8.7)
    assert segs[2]["length_m"] == pytest.approx(0.25) and segs[2]["bend_angle_deg"] == pytest.approx(116)
    assert segs[3]["length_m"] == pytest.approx(8.4) and segs[3]["depression_deg"] == pytest.approx(6.2)
    assert "bend_angle_deg=116.0000" in capsys.readouterr().out


def test_reconstruct_missing_label(tmp_path, capsys):
    assert run("synth-logs", LAB, "--noise", "none", "--out", tmp_path) == 0
    rows = read_csv(tmp_path / "markers.csv")
    rows[4][2] = ""
    with open(tmp_path / "markers.csv", "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
    assert run("reconstruct", tmp_path / "log.csv", tmp_path / "markers.csv", "--out", tmp_path) == 2
    assert f"marker {rows[4][0]}" in capsys.readouterr().err


def test_show_defaults(capsys):
    assert run("--show-defaults") == 0
    d = json.loads(capsys.readouterr().out)
    text = json.dumps(d)
    assert "9.80665" in text and "0.5" in text
    assert "12" in text and "24" in text


def test_no_command_is_an_error(capsys):
    assert run() == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "vinebot", "--show-defaults"], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)
