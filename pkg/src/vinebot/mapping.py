"""Pipe centerline reconstruction from IMU orientation and cable-marker odometry.

World frame is NWU: ``x`` magnetic north, ``y`` west, ``z`` up (opposite
gravity). At rest the accelerometer reads ``+g`` along world ``z``. No
magnetic declination correction is applied.

Pipeline: per-sample ``world_rotation`` from accel/mag, ``segment_path`` to
turn marker-delimited log spans into straight runs and elbows, and
``reconstruct_path`` to sweep them into a 3D polyline. ``path_metrics``
scores a reconstruction against ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .constants import MIN_ACCEL_MAG_ANGLE_RAD

LABELS = ("straight_start", "straight_end", "elbow_start", "elbow_end")
TRAVEL_AXIS = np.array([1.0, 0.0, 0.0])  # sensor axis pointing along the pipe


class DegenerateGeometryError(ValueError):
    pass


class MarkerParseError(ValueError):
    """Marker table or log cannot be segmented; ``marker_id`` names the culprit."""

    def __init__(self, message, marker_id=None):
        super().__init__(message if marker_id is None else f"marker {marker_id}: {message}")
        self.marker_id = marker_id


# --- data types -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ImuSample:
    accel: np.ndarray
    mag: np.ndarray
    t: float = 0.0
    marker_id: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "accel", np.asarray(self.accel, dtype=float))
        object.__setattr__(self, "mag", np.asarray(self.mag, dtype=float))
        _check_pair(self.accel, self.mag)


@dataclass(frozen=True, eq=False)
class SensorLog:
    """Time-ordered IMU records; ``marker_ids[i]`` is ``None`` for unmarked rows."""

    t: np.ndarray
    accel: np.ndarray
    mag: np.ndarray
    marker_ids: tuple

    def __post_init__(self):
        n = len(self.t)
        if self.accel.shape != (n, 3) or self.mag.shape != (n, 3) or len(self.marker_ids) != n:
            raise ValueError("log columns have inconsistent lengths")

    def __len__(self):
        return len(self.t)

    def row_of(self, marker_id):
        for i, m in enumerate(self.marker_ids):
            if m == marker_id:
                return i
        return None

    @classmethod
    def from_samples(cls, samples: Sequence[ImuSample]) -> "SensorLog":
        if not samples:
            return cls(np.zeros(0), np.zeros((0, 3)), np.zeros((0, 3)), ())
        return cls(
            np.array([s.t for s in samples]),
            np.array([s.accel for s in samples]),
            np.array([s.mag for s in samples]),
            tuple(s.marker_id for s in samples),
        )


class Marker(NamedTuple):
    marker_id: int
    odometry: float
    label: str


@dataclass(frozen=True, eq=False)
class PathSegment:
    """A straight run or an elbow.

    ``orientation`` is set for straights: a rotation whose first column is the
    pipe direction in the world frame. ``bend_angle`` is set for elbows.
    """

    kind: str
    length: float
    orientation: np.ndarray | None = None
    bend_angle: float | None = None

    def __post_init__(self):
        if self.kind not in ("straight", "elbow"):
            raise ValueError(f"segment kind must be straight or elbow, got {self.kind!r}")
        if not self.length > 0:
            raise ValueError("segment length must be > 0")
        if self.kind == "straight":
            if self.orientation is None:
                raise ValueError("straight segment needs an orientation")
            object.__setattr__(self, "orientation", np.asarray(self.orientation, dtype=float))
        elif self.bend_angle is not None and not 0 < self.bend_angle < math.pi:
            raise ValueError("elbow bend_angle must be in (0, pi)")

    @property
    def direction(self) -> np.ndarray:
        return self.orientation[:, 0]

    @classmethod
    def straight(cls, length, direction):
        return cls("straight", length, orientation=rotation_from_direction(direction))

    @classmethod
    def elbow(cls, length, bend_angle=None):
        return cls("elbow", length, bend_angle=bend_angle)


@dataclass
class Polyline3D:
    """Sampled centerline with exact arc length, unit tangents and segment provenance."""

    s: np.ndarray
    points: np.ndarray
    tangents: np.ndarray
    segment_index: np.ndarray
    segment_kinds: tuple = field(default=())
    start_tangents: np.ndarray | None = None

    def segment_ids(self) -> np.ndarray:
        ids, first = np.unique(self.segment_index, return_index=True)
        return ids[np.argsort(first)]

    def segment_span(self, k):
        """Arc lengths and tangents of segment ``k``, led by the junction it starts from.

        Junction points are stored once, at the end of the earlier segment;
        the leading sample here carries segment ``k``'s own start tangent.
        """
        rows = np.flatnonzero(self.segment_index == k)
        first = rows[0]
        if first == 0:
            return self.s[rows], self.tangents[rows]
        ids = list(self.segment_ids())
        lead = self.tangents[first - 1] if self.start_tangents is None else self.start_tangents[ids.index(k)]
        return (np.concatenate(([self.s[first - 1]], self.s[rows])),
                np.vstack((lead, self.tangents[rows])))

    @property
    def length(self) -> float:
        return float(self.s[-1]) if len(self.s) else 0.0

    @property
    def endpoint(self) -> np.ndarray:
        return self.points[-1]

    def chord_length(self) -> float:
        return float(np.sum(np.linalg.norm(np.diff(self.points, axis=0), axis=1)))


class Heading(NamedTuple):
    azimuth: float
    depression: float
    vertical: bool


# --- orientation ------------------------------------------------------------


def _check_pair(accel, mag):
    na, nm = np.linalg.norm(accel), np.linalg.norm(mag)
    if na == 0 or nm == 0:
        raise DegenerateGeometryError("accel and mag must be non-zero")
    cosang = abs(float(accel @ mag)) / (na * nm)
    if cosang > math.cos(MIN_ACCEL_MAG_ANGLE_RAD):
        raise DegenerateGeometryError(
            "accel and mag are within 1 deg of parallel; heading is undefined"
        )


def world_rotation(accel, mag) -> np.ndarray:
    """Rotation taking sensor-frame vectors into the NWU world frame.

    Rows are the world axes written in sensor coordinates: ``z`` is the
    normalised specific force, ``x`` the magnetometer reading with its ``z``
    component removed (Gram-Schmidt), ``y = z x x``.
    """
    a = np.asarray(accel, dtype=float)
    m = np.asarray(mag, dtype=float)
    _check_pair(a, m)
    z = a / np.linalg.norm(a)
    x = m - (m @ z) * z
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return np.vstack([x, y, z])


def rotation_from_direction(direction, roll: float = 0.0) -> np.ndarray:
    """Rotation whose first column is ``direction``, with the second column
    horizontal (pointing left of travel) before applying ``roll`` about it."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    left = np.cross([0.0, 0.0, 1.0], d)
    if np.linalg.norm(left) < 1e-12:
        left = np.array([0.0, 1.0, 0.0])
    left /= np.linalg.norm(left)
    up = np.cross(d, left)
    R = np.column_stack([d, left, up])
    if roll:
        c, s = math.cos(roll), math.sin(roll)
        R = R @ np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
    return R


def direction_from_angles(azimuth: float, depression: float) -> np.ndarray:
    """Unit vector from azimuth (from north toward west) and angle of depression."""
    ce = math.cos(depression)
    return np.array([ce * math.cos(azimuth), ce * math.sin(azimuth), -math.sin(depression)])


def heading_and_depression(rot, axis=TRAVEL_AXIS) -> Heading:
    d = np.asarray(rot, dtype=float) @ np.asarray(axis, dtype=float)
    n = np.linalg.norm(d)
    if n == 0:
        raise ValueError("axis must be non-zero")
    d = d / n
    depression = -math.asin(max(-1.0, min(1.0, d[2])))
    if math.hypot(d[0], d[1]) < 1e-12:
        return Heading(0.0, depression, True)
    return Heading(math.atan2(d[1], d[0]), depression, False)


def angle_between(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return math.atan2(float(np.linalg.norm(np.cross(a, b))), float(a @ b))


def mean_direction(rotations: np.ndarray, axis=TRAVEL_AXIS) -> np.ndarray:
    """Average of the per-sample travel directions, renormalised."""
    d = np.einsum("nij,j->ni", rotations, np.asarray(axis, dtype=float))
    m = d.mean(axis=0)
    n = np.linalg.norm(m)
    if n < 1e-12:
        raise DegenerateGeometryError("sample directions cancel; no mean direction")
    return m / n


def log_rotations(log: SensorLog) -> np.ndarray:
    """Vectorised ``world_rotation`` over every row of a log, shape (n, 3, 3)."""
    a, m = log.accel, log.mag
    na = np.linalg.norm(a, axis=1)
    nm = np.linalg.norm(m, axis=1)
    if np.any(na == 0) or np.any(nm == 0):
        raise DegenerateGeometryError("log has zero accel or mag rows")
    z = a / na[:, None]
    cosang = np.abs(np.einsum("ij,ij->i", z, m)) / nm
    if np.any(cosang > math.cos(MIN_ACCEL_MAG_ANGLE_RAD)):
        raise DegenerateGeometryError("log row with accel/mag within 1 deg of parallel")
    x = m - np.einsum("ij,ij->i", m, z)[:, None] * z
    x /= np.linalg.norm(x, axis=1)[:, None]
    y = np.cross(z, x)
    return np.stack([x, y, z], axis=1)


# --- segmentation -----------------------------------------------------------


def segment_path(log: SensorLog, marker_table: Sequence[Marker], axis=TRAVEL_AXIS) -> list[PathSegment]:
    """Turn a marker table plus IMU log into straight runs and elbows.

    Every segment is a ``*_start`` marker followed by its matching ``*_end``.
    Straights take their length from the odometry difference and their
    direction from the mean of the travel directions over the log rows between
    (and including) their two markers. Elbows take their arc length from
    odometry and their bend angle from the flanking straights.

    Consecutive segments may share a boundary odometry; gaps between an end
    marker and the next start marker are not part of any segment.
    """
    markers = [Marker(int(m[0]), float(m[1]), str(m[2])) for m in marker_table]
    if not markers:
        return []
    for m in markers:
        if m.label not in LABELS:
            raise MarkerParseError(f"unknown label {m.label!r}", m.marker_id)

    spans = []  # (kind, start_marker, end_marker)
    open_marker = None
    prev_odo = -math.inf
    for m in markers:
        if m.odometry < prev_odo:
            raise MarkerParseError(
                f"odometry {m.odometry} is below the previous marker's {prev_odo}", m.marker_id
            )
        prev_odo = m.odometry
        kind, edge = m.label.split("_")
        if edge == "start":
            if open_marker is not None:
                raise MarkerParseError(
                    f"{m.label} while {open_marker.label} (marker {open_marker.marker_id}) is still open",
                    m.marker_id,
                )
            open_marker = m
        else:
            if open_marker is None or not open_marker.label.startswith(kind):
                raise MarkerParseError(f"{m.label} has no matching {kind}_start", m.marker_id)
            if not m.odometry > open_marker.odometry:
                raise MarkerParseError("segment end must lie beyond its start", m.marker_id)
            spans.append((kind, open_marker, m))
            open_marker = None
    if open_marker is not None:
        raise MarkerParseError(f"{open_marker.label} is never closed", open_marker.marker_id)

    rotations = log_rotations(log) if len(log) else np.zeros((0, 3, 3))

    directions = []
    for kind, start, end in spans:
        if kind != "straight":
            directions.append(None)
            continue
        i0, i1 = log.row_of(start.marker_id), log.row_of(end.marker_id)
        for mid, row in ((start.marker_id, i0), (end.marker_id, i1)):
            if row is None:
                raise MarkerParseError("straight boundary marker does not appear in the log", mid)
        if i1 < i0:
            raise MarkerParseError("log row precedes its start marker", end.marker_id)
        directions.append(mean_direction(rotations[i0 : i1 + 1], axis))

    segments = []
    for k, (kind, start, end) in enumerate(spans):
        length = end.odometry - start.odometry
        if kind == "straight":
            segments.append(PathSegment.straight(length, directions[k]))
            continue
        before = directions[k - 1] if k > 0 else None
        after = directions[k + 1] if k + 1 < len(spans) else None
        if before is None or after is None:
            raise MarkerParseError("elbow needs a straight on both sides", start.marker_id)
        bend = angle_between(before, after)
        if not bend > 1e-9:
            raise MarkerParseError("elbow joins parallel straights", start.marker_id)
        segments.append(PathSegment.elbow(length, bend))
    return segments


# --- reconstruction ---------------------------------------------------------


def _elbow_frame(t_in, t_out):
    """Unit in-plane normal for a turn from ``t_in`` toward ``t_out`` and the turn angle."""
    theta = angle_between(t_in, t_out)
    n = t_out - (t_out @ t_in) * t_in
    nn = np.linalg.norm(n)
    if theta < 1e-9 or nn < 1e-12:
        raise DegenerateGeometryError("elbow between parallel or anti-parallel straights")
    return n / nn, theta


def elbow_geometry(segments: Sequence[PathSegment]) -> list:
    """Incoming tangent, turn normal and bend angle for every elbow (``None`` for straights).

    The turn lies in the plane of the neighbouring straight directions. If an
    elbow carries its own ``bend_angle`` it must agree with that plane to
    1e-6 rad, otherwise the path would not be tangent-continuous.
    """
    out = []
    for k, seg in enumerate(segments):
        if seg.kind == "straight":
            out.append(None)
            continue
        if k == 0 or segments[k - 1].kind != "straight":
            raise DegenerateGeometryError(f"elbow {k} has no incoming straight")
        if k + 1 >= len(segments) or segments[k + 1].kind != "straight":
            raise DegenerateGeometryError(f"elbow {k} has no outgoing straight")
        t_in = segments[k - 1].direction
        n, theta = _elbow_frame(t_in, segments[k + 1].direction)
        if seg.bend_angle is not None and abs(seg.bend_angle - theta) > 1e-6:
            raise DegenerateGeometryError(
                f"elbow {k} bend {math.degrees(seg.bend_angle):.4f} deg disagrees with "
                f"neighbouring straights ({math.degrees(theta):.4f} deg)"
            )
        out.append((t_in, n, theta))
    return out


def segment_pose(seg: PathSegment, geom, start: np.ndarray, u: np.ndarray):
    """Points and tangents at arc lengths ``u`` (0..length) within one segment."""
    u = np.asarray(u, dtype=float)
    if seg.kind == "straight":
        d = seg.direction
        return start + u[:, None] * d, np.tile(d, (len(u), 1))
    t_in, n, theta = geom
    r = seg.length / theta
    phi = u / r
    pts = start + r * np.sin(phi)[:, None] * t_in + r * (1 - np.cos(phi))[:, None] * n
    tan = np.cos(phi)[:, None] * t_in + np.sin(phi)[:, None] * n
    return pts, tan


def reconstruct_path(segments: Sequence[PathSegment], origin=(0.0, 0.0, 0.0), sample_spacing: float = 0.01) -> Polyline3D:
    """Sweep straights and circular-arc elbows into a sampled 3D polyline.

    Each segment is sampled at ``ceil(length / sample_spacing)`` equal steps.
    A junction point is stored once and tagged with the segment it ends; the
    next segment's tangent there is kept in ``start_tangents``.
    """
    if not sample_spacing > 0:
        raise ValueError("sample_spacing must be > 0")
    origin = np.asarray(origin, dtype=float)
    if not segments:
        return Polyline3D(np.zeros(1), origin[None, :].copy(), np.full((1, 3), np.nan), np.zeros(1, dtype=int))
    geoms = elbow_geometry(segments)

    s_all, p_all, t_all, idx_all, starts = [], [], [], [], []
    pos = origin.copy()
    s0 = 0.0
    for k, (seg, geom) in enumerate(zip(segments, geoms)):
        n = max(1, math.ceil(seg.length / sample_spacing - 1e-9))
        u = np.linspace(0.0, seg.length, n + 1)
        pts, tan = segment_pose(seg, geom, pos, u)
        starts.append(tan[0])
        keep = slice(0 if k == 0 else 1, None)
        s_all.append(s0 + u[keep])
        p_all.append(pts[keep])
        t_all.append(tan[keep])
        idx_all.append(np.full(len(u[keep]), k))
        pos = pts[-1].copy()
        s0 += seg.length

    return Polyline3D(
        np.concatenate(s_all),
        np.vstack(p_all),
        np.vstack(t_all),
        np.concatenate(idx_all),
        tuple(seg.kind for seg in segments),
        np.array(starts),
    )


def junction_tangent_residuals(poly: Polyline3D) -> list[float]:
    """Tangent angle jump (rad) at every junction that involves an elbow.

    Straight-to-straight junctions are corners by construction and skipped.
    """
    out = []
    ids = poly.segment_ids()
    kinds = poly.segment_kinds
    for j in range(1, len(ids)):
        if kinds and kinds[j - 1] == "straight" and kinds[j] == "straight":
            continue
        last_prev = np.flatnonzero(poly.segment_index == ids[j - 1])[-1]
        _, tan = poly.segment_span(ids[j])
        out.append(angle_between(poly.tangents[last_prev], tan[0]))
    return out


# --- scoring ----------------------------------------------------------------


class PathMetrics(NamedTuple):
    max_orientation_dev: float
    length_dev: float


def _tangent_at(frac_src: np.ndarray, tan_src: np.ndarray, frac: np.ndarray) -> np.ndarray:
    """Tangents at fractional positions ``frac`` by slerp between neighbouring samples."""
    j = np.clip(np.searchsorted(frac_src, frac, side="right") - 1, 0, len(frac_src) - 2)
    f0, f1 = frac_src[j], frac_src[j + 1]
    w = np.where(f1 > f0, (frac - f0) / np.where(f1 > f0, f1 - f0, 1.0), 0.0)
    w = np.clip(w, 0.0, 1.0)
    a, b = tan_src[j], tan_src[j + 1]
    omega = np.arctan2(np.linalg.norm(np.cross(a, b), axis=1), np.einsum("ij,ij->i", a, b))
    so = np.sin(omega)
    small = so < 1e-12
    safe = np.where(small, 1.0, so)
    wa = np.where(small, 1 - w, np.sin((1 - w) * omega) / safe)
    wb = np.where(small, w, np.sin(w * omega) / safe)
    out = wa[:, None] * a + wb[:, None] * b
    out /= np.linalg.norm(out, axis=1)[:, None]
    # exact sample hits return the stored tangent untouched
    out = np.where((w == 0)[:, None], a, out)
    return np.where((w == 1)[:, None], b, out)


def _max_angle(s_a, t_a, s_b, t_b) -> float:
    """Max tangent angle between two spans aligned on normalised arc length."""
    la, lb = s_a[-1] - s_a[0], s_b[-1] - s_b[0]
    if la <= 0 or lb <= 0:
        raise ValueError("cannot align a span of zero length")
    fa = (s_a - s_a[0]) / la
    fb = (s_b - s_b[0]) / lb
    worst = 0.0
    for f_src, t_src, f_dst, t_dst in ((fb, t_b, fa, t_a), (fa, t_a, fb, t_b)):
        other = _tangent_at(f_src, t_src, f_dst)
        ang = np.arctan2(np.linalg.norm(np.cross(other, t_dst), axis=1), np.einsum("ij,ij->i", other, t_dst))
        worst = max(worst, float(ang.max()))
    return worst


def path_metrics(reconstructed: Polyline3D, ground_truth: Polyline3D) -> PathMetrics:
    """Worst tangent misalignment (rad) and absolute total length difference (m).

    When both polylines have the same number of segments, tangents are
    compared segment by segment at matching fractions of each segment's arc
    length; otherwise the two whole paths are aligned by fraction of total
    length.
    """
    for name, p in (("reconstructed", reconstructed), ("ground truth", ground_truth)):
        if len(p.s) < 2 or p.length <= 0:
            raise ValueError(f"{name} polyline has zero length; cannot align")
    length_dev = abs(reconstructed.length - ground_truth.length)

    ids_r, ids_g = reconstructed.segment_ids(), ground_truth.segment_ids()
    worst = 0.0
    if len(ids_r) == len(ids_g):
        for k_r, k_g in zip(ids_r, ids_g):
            worst = max(worst, _max_angle(*reconstructed.segment_span(k_r), *ground_truth.segment_span(k_g)))
    else:
        worst = _max_angle(reconstructed.s, reconstructed.tangents, ground_truth.s, ground_truth.tangents)
    return PathMetrics(worst, length_dev)


def tangents_from_points(points: np.ndarray, segment_index: np.ndarray):
    """Estimate unit tangents from sampled points, segment by segment.

    Returns per-point tangents and each segment's start tangent. A segment
    after the first begins at the previous segment's last point. Interior
    points use the central chord, which is exact for equally spaced samples
    on a line or circle; end tangents reflect the neighbouring interior
    tangent across the end chord, also exact on a circle.
    """
    tan = np.full_like(points, np.nan, dtype=float)
    ids, first = np.unique(segment_index, return_index=True)
    starts = []
    for k in ids[np.argsort(first)]:
        rows = np.flatnonzero(segment_index == k)
        lead = rows[0] > 0
        p = points[np.concatenate(([rows[0] - 1], rows))] if lead else points[rows]
        if len(p) == 1:
            starts.append(np.full(3, np.nan))
            continue
        if len(p) == 2:
            c = p[1] - p[0]
            t = np.tile(c / np.linalg.norm(c), (2, 1))
        else:
            t = np.empty_like(p)
            mid = p[2:] - p[:-2]
            t[1:-1] = mid / np.linalg.norm(mid, axis=1)[:, None]
            for end, nb in ((0, 1), (-1, -2)):
                c = p[nb] - p[end] if end == 0 else p[end] - p[nb]
                c = c / np.linalg.norm(c)
                t[end] = 2 * (c @ t[nb]) * c - t[nb]
            t /= np.linalg.norm(t, axis=1)[:, None]
        starts.append(t[0])
        tan[rows] = t[1:] if lead else t
    return tan, np.array(starts)
