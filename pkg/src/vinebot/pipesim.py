"""Quasi-static growth through a pipe and synthetic IMU/marker logs.

Tail and tether tension are accumulated from the base station toward the tip:
gravity along each straight and arc, Coulomb friction from the line's weight
on straights, and capstan amplification ``exp(mu * angle)`` across bends.
Tension is floored at zero after every segment since a slack line cannot push.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .constants import G, reference_mag_field
from .core import LoadState, VineBodySpec, min_growth_pressure
from .mapping import (
    Marker,
    PathSegment,
    SensorLog,
    direction_from_angles,
    elbow_geometry,
    heading_and_depression,
    reconstruct_path,
    rotation_from_direction,
    segment_pose,
)
from .tipmount import InteractionModel, Mount, MountLeftBehind, can_pull_forward, growth_pressure_with_mount


@dataclass(frozen=True, eq=False)
class PipeSpec:
    segments: tuple
    inner_diameter: float = 0.10

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.inner_diameter > 0:
            raise ValueError("inner_diameter must be > 0")
        # validates elbow placement and bend consistency
        object.__setattr__(self, "_geoms", elbow_geometry(self.segments) if self.segments else [])

    @property
    def total_length(self) -> float:
        return float(sum(s.length for s in self.segments))

    def check_fit(self, body: VineBodySpec):
        if body.diameter > self.inner_diameter:
            warnings.warn(
                f"body diameter {body.diameter} m exceeds pipe inner diameter {self.inner_diameter} m",
                stacklevel=2,
            )

    def centerline(self, sample_spacing=0.01, origin=(0.0, 0.0, 0.0)):
        return reconstruct_path(self.segments, origin, sample_spacing)

    def pose_at(self, s: float):
        """Position and unit tangent at arc length ``s`` from the pipe entry."""
        s = min(max(s, 0.0), self.total_length)
        pos = np.zeros(3)
        start = 0.0
        for seg, geom in zip(self.segments, self._geoms):
            if s <= start + seg.length or seg is self.segments[-1]:
                p, t = segment_pose(seg, geom, pos, np.array([s - start]))
                return p[0], t[0]
            p, _ = segment_pose(seg, geom, pos, np.array([seg.length]))
            pos = p[0]
            start += seg.length
        raise ValueError("pipe has no segments")

    # JSON form: {inner_diameter_m, segments: [{kind, length_m, azimuth_deg, depression_deg, bend_angle_deg?}]}
    @classmethod
    def from_dict(cls, data: dict) -> "PipeSpec":
        unknown = set(data) - {"inner_diameter_m", "segments"}
        if unknown:
            raise ValueError(f"unknown pipe keys: {sorted(unknown)}")
        segs = []
        for i, raw in enumerate(data["segments"]):
            kind = raw.get("kind")
            extra = set(raw) - {"kind", "length_m", "azimuth_deg", "depression_deg", "bend_angle_deg"}
            if extra:
                raise ValueError(f"segment {i}: unknown keys {sorted(extra)}")
            if kind == "straight":
                d = direction_from_angles(
                    math.radians(raw.get("azimuth_deg", 0.0)), math.radians(raw.get("depression_deg", 0.0))
                )
                segs.append(PathSegment.straight(raw["length_m"], d))
            elif kind == "elbow":
                bend = raw.get("bend_angle_deg")
                segs.append(PathSegment.elbow(raw["length_m"], None if bend is None else math.radians(bend)))
            else:
                raise ValueError(f"segment {i}: kind must be straight or elbow, got {kind!r}")
        return cls(tuple(segs), data.get("inner_diameter_m", 0.10))

    def to_dict(self) -> dict:
        out = []
        for seg, geom in zip(self.segments, self._geoms):
            if seg.kind == "straight":
                h = heading_and_depression(seg.orientation)
                out.append({"kind": "straight", "length_m": seg.length,
                            "azimuth_deg": math.degrees(h.azimuth), "depression_deg": math.degrees(h.depression)})
            else:
                out.append({"kind": "elbow", "length_m": seg.length, "bend_angle_deg": math.degrees(geom[2])})
        return {"inner_diameter_m": self.inner_diameter, "segments": out}


@dataclass(frozen=True)
class TetherSpec:
    """A line dragged from the base station to the tip (tail material or cable)."""

    mass_per_length: float = 0.0
    mu_pipe: float = 0.0
    base_tension: float = 0.0

    def __post_init__(self):
        if self.mass_per_length < 0 or self.mu_pipe < 0 or self.base_tension < 0:
            raise ValueError("tether parameters must be >= 0")


# Defaults for the simulator. The tail linear density comes from 9 g per 25 cm;
# friction coefficients and the base-station drag are not measured values.
DEFAULT_TAIL = TetherSpec(mass_per_length=0.036, mu_pipe=0.3, base_tension=0.5)
DEFAULT_TETHER = TetherSpec(mass_per_length=0.04, mu_pipe=0.3, base_tension=0.0)
DEFAULT_MU_TIP = 0.6  # tip assembly on pipe wall, through the body film


@dataclass(frozen=True)
class NoiseSpec:
    accel_sigma: float = 0.0
    mag_sigma: float = 0.0
    marker_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if min(self.accel_sigma, self.mag_sigma, self.marker_sigma) < 0:
            raise ValueError("noise sigmas must be >= 0")

    @classmethod
    def default(cls, seed=0, mag_strength=None):
        if mag_strength is None:
            mag_strength = float(np.linalg.norm(reference_mag_field()))
        return cls(accel_sigma=0.05, mag_sigma=0.005 * mag_strength, marker_sigma=0.02, seed=seed)


@dataclass
class GrowthTrace:
    length: np.ndarray
    t_tail: np.ndarray
    f_load: np.ndarray
    pressure: np.ndarray
    max_reachable_length: float
    status: str  # "complete", "pressure_limit" or "mount_stranded"
    p_max: float = math.inf
    notes: list = field(default_factory=list)

    @property
    def initial_pressure(self) -> float:
        return float(self.pressure[0]) if len(self.pressure) else math.nan

    def __len__(self):
        return len(self.length)


# --- tension ----------------------------------------------------------------


def tail_tension(pipe: PipeSpec, tether: TetherSpec, everted_length: float) -> float:
    """Tension (N) at the tip end of a line pulled through the first ``everted_length`` m.

    Straights add ``w L (sin(elev) + mu |cos(elev)|)`` with ``w`` the weight
    per metre. Elbows multiply the entering tension by ``exp(mu * angle)``
    over the traversed angle and add the weight's share of the height gained.
    """
    if everted_length < 0 or everted_length > pipe.total_length + 1e-9:
        raise ValueError(f"everted_length {everted_length} outside [0, {pipe.total_length}]")
    w = tether.mass_per_length * G
    mu = tether.mu_pipe
    T = tether.base_tension
    remaining = everted_length
    for seg, geom in zip(pipe.segments, pipe._geoms):
        if remaining <= 0:
            break
        L = min(seg.length, remaining)
        if seg.kind == "straight":
            dz = seg.direction[2]
            T += w * L * (dz + mu * math.sqrt(max(0.0, 1.0 - dz * dz)))
        else:
            t_in, n, theta = geom
            r = seg.length / theta
            phi = L / r
            rise = r * math.sin(phi) * t_in[2] + r * (1 - math.cos(phi)) * n[2]
            T = T * math.exp(mu * phi) + w * rise
        T = max(0.0, T)
        remaining -= L
    return T


def gravity_integral(pipe: PipeSpec, tether: TetherSpec, everted_length: float) -> float:
    """Closed-form ``base_tension + w * (height gained)`` for frictionless lines."""
    pos, _ = pipe.pose_at(everted_length)
    return tether.base_tension + tether.mass_per_length * G * float(pos[2])


# --- growth -----------------------------------------------------------------


def tip_loads(pipe, s, tail, tether, tip_mass, mu_tip, mount):
    """Load state at everted length ``s``.

    The tip assembly's weight component along the tangent and its wall
    friction become ``W`` and ``f_mount`` when a mount carries it, or fold
    into ``f_load`` when it is attached straight to the tail.
    """
    _, tangent = pipe.pose_at(s)
    elev_sin = float(tangent[2])
    elev_cos = math.sqrt(max(0.0, 1.0 - elev_sin**2))
    t_tail = tail_tension(pipe, tail, s)
    f_tether = tail_tension(pipe, tether, s) if tether is not None else 0.0
    weight = tip_mass * G
    w_axial = max(0.0, weight * elev_sin)
    wall = mu_tip * weight * elev_cos
    if mount is None:
        return LoadState(t_tail=t_tail, f_load=f_tether + w_axial + wall)
    return LoadState(t_tail=t_tail, f_load=f_tether, w_axial=w_axial, f_mount_ext=wall + mount.f_mount_ext)


def simulate_growth(
    pipe: PipeSpec,
    body: VineBodySpec,
    mount: Mount | None = None,
    model: InteractionModel = InteractionModel(),
    tether: TetherSpec | None = DEFAULT_TETHER,
    p_max: float = 10_000.0,
    step: float = 0.05,
    *,
    tail: TetherSpec = DEFAULT_TAIL,
    payload_mass: float = 0.0,
    mu_tip: float = DEFAULT_MU_TIP,
) -> GrowthTrace:
    """March the everted length along the pipe and record the pressure to grow.

    The tip assembly mass is ``mount.mass + payload_mass``. Marching stops at
    the pipe end, when the pressure to grow exceeds ``p_max``, or when a
    mount can no longer drag its load (status ``mount_stranded``). Only
    reachable samples are recorded.
    """
    if not step > 0:
        raise ValueError("step must be > 0")
    if not p_max > 0:
        raise ValueError("p_max must be > 0")
    pipe.check_fit(body)
    total = pipe.total_length
    n = int(math.floor(total / step + 1e-9))
    lengths = [k * step for k in range(n + 1)]
    if total - lengths[-1] > 1e-9:
        lengths.append(total)
    tip_mass = payload_mass + (mount.mass if mount is not None else 0.0)

    rows = []
    status = "complete"
    for s in lengths:
        load = tip_loads(pipe, s, tail, tether, tip_mass, mu_tip, mount)
        if mount is None:
            p = min_growth_pressure(body, load)
        else:
            if not can_pull_forward(mount, load.f_load, load.w_axial, load.f_mount_ext):
                status = "mount_stranded"
                break
            try:
                p = growth_pressure_with_mount(body, mount, model, load)
            except MountLeftBehind:
                status = "mount_stranded"
                break
        if p > p_max:
            status = "pressure_limit"
            break
        rows.append((s, load.t_tail, load.f_load, p))

    arr = np.array(rows, dtype=float).reshape(-1, 4)
    reach = float(arr[-1, 0]) if len(arr) else 0.0
    return GrowthTrace(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], reach, status, p_max)


# --- synthetic logs ---------------------------------------------------------


def synth_logs(
    pipe: PipeSpec,
    noise: NoiseSpec = NoiseSpec(),
    sample_per_m: float = 20.0,
    *,
    speed: float = 0.05,
    roll: float = 0.0,
    mag_ref=None,
) -> tuple[SensorLog, list[Marker]]:
    """Walk the centerline and emit IMU rows plus a boundary marker table.

    Rows are spaced ``1 / sample_per_m`` along each segment, with both of a
    segment's boundaries included. A boundary between two segments therefore
    yields two rows at the same place: the end marker of one segment and the
    start marker of the next. Marker odometry is the true boundary position
    plus Gaussian noise, shared by the two markers at a boundary. Sensor
    ``x`` points along the tangent.
    """
    if not sample_per_m > 0:
        raise ValueError("sample_per_m must be > 0")
    rng = np.random.default_rng(noise.seed)
    g_world = np.array([0.0, 0.0, G])
    m_world = np.asarray(reference_mag_field() if mag_ref is None else mag_ref, dtype=float)

    rots, times, ids = [], [], []
    markers: list[Marker] = []
    n_bound = len(pipe.segments) + 1
    bound_odo = np.concatenate([[0.0], np.cumsum([s.length for s in pipe.segments])])
    bound_odo = bound_odo + (rng.normal(0.0, noise.marker_sigma, n_bound) if noise.marker_sigma > 0 else 0.0)
    bound_odo = np.maximum.accumulate(bound_odo)

    pos = np.zeros(3)
    s0 = 0.0
    for k, (seg, geom) in enumerate(zip(pipe.segments, pipe._geoms)):
        n = max(1, math.ceil(seg.length * sample_per_m - 1e-9))
        u = np.linspace(0.0, seg.length, n + 1)
        pts, tan = segment_pose(seg, geom, pos, u)
        for j, t in enumerate(tan):
            rots.append(rotation_from_direction(t, roll))
            times.append((s0 + u[j]) / speed)
            ids.append(None)
        start_id, end_id = 2 * k + 1, 2 * k + 2
        ids[-(n + 1)] = start_id
        ids[-1] = end_id
        markers.append(Marker(start_id, float(bound_odo[k]), f"{seg.kind}_start"))
        markers.append(Marker(end_id, float(bound_odo[k + 1]), f"{seg.kind}_end"))
        pos = pts[-1]
        s0 += seg.length

    R = np.array(rots).reshape(-1, 3, 3)
    # sensor reading = R^T * world vector
    accel = np.einsum("nji,j->ni", R, g_world)
    mag = np.einsum("nji,j->ni", R, m_world)
    if noise.accel_sigma > 0:
        accel = accel + rng.normal(0.0, noise.accel_sigma, accel.shape)
    if noise.mag_sigma > 0:
        mag = mag + rng.normal(0.0, noise.mag_sigma, mag.shape)
    log = SensorLog(np.array(times, dtype=float), accel, mag, tuple(ids))
    return log, markers


# --- reference geometries ---------------------------------------------------


def lab_pipe() -> PipeSpec:
    """Planar 4.57 m test loop with three 90 degree elbows (10 cm ID).

    Straight and elbow lengths are illustrative; only the total and the bend
    count come from the laboratory description.
    """
    deg = math.radians
    segs = [
        PathSegment.straight(1.20, direction_from_angles(0.0, 0.0)),
        PathSegment.elbow(0.25, deg(90)),
        PathSegment.straight(0.90, direction_from_angles(deg(90), 0.0)),
        PathSegment.elbow(0.25, deg(90)),
        PathSegment.straight(1.00, direction_from_angles(0.0, 0.0)),
        PathSegment.elbow(0.25, deg(90)),
        PathSegment.straight(0.72, direction_from_angles(deg(-90), 0.0)),
    ]
    return PipeSpec(tuple(segs), inner_diameter=0.10)


def field_azimuth_after_elbow(bend=math.radians(116.0), dep_in=math.radians(8.7), dep_out=math.radians(6.2)):
    """Azimuth change that makes two runs with the given depressions meet at ``bend``."""
    c = (math.cos(bend) - math.sin(dep_in) * math.sin(dep_out)) / (math.cos(dep_in) * math.cos(dep_out))
    return math.acos(max(-1.0, min(1.0, c)))


def field_pipe() -> PipeSpec:
    """Wastewater deployment: vertical 3.6 m spool, then 4.5 m, a 0.25 m 116 deg elbow and 8.4 m.

    The 4.5 m run heads west (azimuth 90 deg); the spool enters it through a
    corner since no elbow was logged there. The turn after the elbow is to
    the south.
    """
    deg = math.radians
    az1 = deg(90.0)
    az2 = az1 - field_azimuth_after_elbow()
    segs = [
        PathSegment.straight(3.6, direction_from_angles(az1, deg(90.0))),
        PathSegment.straight(4.5, direction_from_angles(az1, deg(8.7))),
        PathSegment.elbow(0.25, deg(116.0)),
        PathSegment.straight(8.4, direction_from_angles(az2, deg(6.2))),
    ]
    return PipeSpec(tuple(segs), inner_diameter=0.10)
