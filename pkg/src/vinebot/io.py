"""CSV and JSON readers/writers for trials, logs, markers, polylines and traces.

Readers raise ``FormatError`` naming the file and line of the first bad row.
Floats are written with ``repr`` so files round-trip exactly and repeated runs
produce identical bytes.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .core import CalibrationResult, CalibrationTrial
from .mapping import LABELS, Marker, Polyline3D, SensorLog, tangents_from_points

TRIALS_HEADER = ["load_N", "pressure_Pa"]
LOG_HEADER = ["t_s", "ax", "ay", "az", "mx", "my", "mz", "marker_id"]
MARKER_HEADER = ["marker_id", "odometry_m", "label"]
POLYLINE_HEADER = ["s_m", "x_m", "y_m", "z_m", "segment_index"]
TRACE_HEADER = ["length_m", "t_tail_N", "f_load_N", "pressure_Pa"]
SWEEP_HEADER = ["load_N", "pressure_Pa", "mount_kind"]


class FormatError(ValueError):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


def _fmt(x) -> str:
    return repr(float(x))


def _read_rows(path, header):
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            first = next(reader)
        except StopIteration:
            raise FormatError(path, 1, "empty file, expected header " + ",".join(header)) from None
        if [h.strip() for h in first] != header:
            raise FormatError(path, 1, f"expected header {','.join(header)}, got {','.join(first)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise FormatError(path, lineno, f"expected {len(header)} fields, got {len(row)}")
            yield lineno, [c.strip() for c in row]


def _floats(path, lineno, cells, names):
    out = []
    for c, name in zip(cells, names):
        try:
            out.append(float(c))
        except ValueError:
            raise FormatError(path, lineno, f"{name} is not a number: {c!r}") from None
    return out


def _write_csv(path, header, rows):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def read_json(path):
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(path, exc.lineno, exc.msg) from None


# --- calibration ------------------------------------------------------------


def read_trials(path) -> list[CalibrationTrial]:
    trials = []
    for lineno, cells in _read_rows(path, TRIALS_HEADER):
        load, p = _floats(path, lineno, cells, TRIALS_HEADER)
        try:
            trials.append(CalibrationTrial(load, p))
        except ValueError as exc:
            raise FormatError(path, lineno, str(exc)) from None
    return trials


def write_trials(path, trials):
    _write_csv(path, TRIALS_HEADER, [(_fmt(t.applied_load), _fmt(t.observed_growth_pressure)) for t in trials])


def write_calibration(path, result: CalibrationResult):
    write_json(path, result.to_dict())


def read_calibration(path) -> CalibrationResult:
    d = read_json(path)
    return CalibrationResult(d["C"], d["f_eversion_N"], d["rms_residual_Pa"])


# --- sensor logs ------------------------------------------------------------


def read_log(path) -> SensorLog:
    t, acc, mag, ids = [], [], [], []
    for lineno, cells in _read_rows(path, LOG_HEADER):
        vals = _floats(path, lineno, cells[:7], LOG_HEADER[:7])
        t.append(vals[0])
        acc.append(vals[1:4])
        mag.append(vals[4:7])
        if cells[7] == "":
            ids.append(None)
        else:
            try:
                ids.append(int(cells[7]))
            except ValueError:
                raise FormatError(path, lineno, f"marker_id is not an integer: {cells[7]!r}") from None
    return SensorLog(np.array(t, dtype=float), np.array(acc, dtype=float).reshape(-1, 3),
                     np.array(mag, dtype=float).reshape(-1, 3), tuple(ids))


def write_log(path, log: SensorLog):
    rows = []
    for i in range(len(log)):
        mid = log.marker_ids[i]
        rows.append([_fmt(log.t[i]), *map(_fmt, log.accel[i]), *map(_fmt, log.mag[i]),
                     "" if mid is None else str(mid)])
    _write_csv(path, LOG_HEADER, rows)


def read_markers(path) -> list[Marker]:
    out = []
    for lineno, cells in _read_rows(path, MARKER_HEADER):
        try:
            mid = int(cells[0])
        except ValueError:
            raise FormatError(path, lineno, f"marker_id is not an integer: {cells[0]!r}") from None
        (odo,) = _floats(path, lineno, cells[1:2], ["odometry_m"])
        if cells[2] not in LABELS:
            raise FormatError(path, lineno, f"marker {mid}: label {cells[2]!r} not one of {', '.join(LABELS)}")
        out.append(Marker(mid, odo, cells[2]))
    return out


def write_markers(path, markers):
    _write_csv(path, MARKER_HEADER, [(str(m.marker_id), _fmt(m.odometry), m.label) for m in markers])


# --- polylines, traces, sweeps ----------------------------------------------


def write_polyline(path, poly: Polyline3D):
    rows = [(_fmt(s), *map(_fmt, p), str(int(k))) for s, p, k in zip(poly.s, poly.points, poly.segment_index)]
    _write_csv(path, POLYLINE_HEADER, rows)


def read_polyline(path) -> Polyline3D:
    """Read a polyline; tangents are re-estimated from the points."""
    s, pts, idx = [], [], []
    for lineno, cells in _read_rows(path, POLYLINE_HEADER):
        vals = _floats(path, lineno, cells[:4], POLYLINE_HEADER[:4])
        s.append(vals[0])
        pts.append(vals[1:4])
        try:
            idx.append(int(cells[4]))
        except ValueError:
            raise FormatError(path, lineno, f"segment_index is not an integer: {cells[4]!r}") from None
    if not s:
        raise FormatError(path, 2, "polyline has no points")
    points = np.array(pts, dtype=float)
    segment_index = np.array(idx, dtype=int)
    tangents, starts = tangents_from_points(points, segment_index)
    return Polyline3D(np.array(s, dtype=float), points, tangents, segment_index, start_tangents=starts)


def write_trace(path, trace):
    rows = [tuple(map(_fmt, r)) for r in zip(trace.length, trace.t_tail, trace.f_load, trace.pressure)]
    _write_csv(path, TRACE_HEADER, rows)


def write_sweep(path, rows):
    _write_csv(path, SWEEP_HEADER, [(_fmt(l), _fmt(p), k) for l, p, k in rows])
