import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from vinebot.constants import G, reference_mag_field
from vinebot.mapping import (
    DegenerateGeometryError,
    ImuSample,
    Marker,
    MarkerParseError,
    PathSegment,
    SensorLog,
    direction_from_angles,
    heading_and_depression,
    junction_tangent_residuals,
    path_metrics,
    reconstruct_path,
    rotation_from_direction,
    segment_path,
    world_rotation,
)
from vinebot.pipesim import NoiseSpec, PipeSpec, lab_pipe, synth_logs

M_REF = reference_mag_field()


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 2] *= -1
    return q


def yaw(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1.0]])


def test_world_rotation_identity():
    np.testing.assert_allclose(world_rotation([0, 0, 9.81], [0.2, 0, -0.4]), np.eye(3), atol=1e-12)


@pytest.mark.parametrize("theta", [0.3, -1.2, 2.9])
def test_world_rotation_recovers_yaw(theta):
    r = yaw(theta)
    got = world_rotation(r.T @ [0, 0, G], r.T @ M_REF)
    np.testing.assert_allclose(got, r, atol=1e-9)


def test_world_rotation_degenerate():
    with pytest.raises(DegenerateGeometryError):
        world_rotation([0, 0, 9.81], [0, 0, -0.4])
    with pytest.raises(DegenerateGeometryError):
        world_rotation([0, 0, 9.81], [math.sin(math.radians(0.5)), 0, math.cos(math.radians(0.5))])
    with pytest.raises(DegenerateGeometryError):
        world_rotation([0, 0, 0], [1, 0, 0])
    with pytest.raises(DegenerateGeometryError):
        ImuSample([0, 0, 1], [0, 0, 2])


seeds = st.integers(0, 2**32 - 1)


@given(seeds)
def test_world_rotation_round_trip(seed):
    r = random_rotation(np.random.default_rng(seed))
    got = world_rotation(r.T @ np.array([0, 0, G]), r.T @ M_REF)
    np.testing.assert_allclose(got, r, atol=1e-9)


vec = st.lists(st.floats(-10, 10), min_size=3, max_size=3).map(np.array)


@given(vec, vec, st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_world_rotation_orthonormal_and_scale_free(a, m, ka, km):
    assume(np.linalg.norm(a) > 1e-3 and np.linalg.norm(m) > 1e-3)
    cosang = abs(a @ m) / (np.linalg.norm(a) * np.linalg.norm(m))
    assume(cosang < math.cos(math.radians(1.5)))
    r = world_rotation(a, m)
    np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-9)
    assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(world_rotation(ka * a, km * m), r, atol=1e-9)


def test_heading_examples():
    h = heading_and_depression(np.eye(3))
    assert h.azimuth == 0 and h.depression == 0 and not h.vertical
    d = math.radians(8.7)
    rot = rotation_from_direction([0, math.cos(d), -math.sin(d)])
    h = heading_and_depression(rot)
    assert math.degrees(h.depression) == pytest.approx(8.7, abs=1e-9)
    assert math.degrees(h.azimuth) == pytest.approx(90.0, abs=1e-9)
    h = heading_and_depression(rotation_from_direction([0, 0, -1]))
    assert h.vertical and h.azimuth == 0.0
    assert math.degrees(h.depression) == pytest.approx(90.0)


@given(st.floats(-math.pi + 1e-6, math.pi - 1e-6), st.floats(-1.5, 1.5), st.floats(-math.pi, math.pi))
def test_heading_inverts_direction_from_angles(az, dep, roll):
    h = heading_and_depression(rotation_from_direction(direction_from_angles(az, dep), roll))
    assert h.depression == pytest.approx(dep, abs=1e-9)
    assert h.azimuth == pytest.approx(az, abs=1e-7)


def _markers(spec):
    return [Marker(i, o, lab) for i, (o, lab) in enumerate(spec, start=1)]


def test_segment_single_straight():
    pipe = PipeSpec((PathSegment.straight(4.5, direction_from_angles(0.4, math.radians(8.7))),))
    log, markers = synth_logs(pipe, NoiseSpec())
    segs = segment_path(log, markers)
    assert len(segs) == 1 and segs[0].kind == "straight"
    assert segs[0].length == pytest.approx(4.5, abs=1e-12)
    assert math.degrees(heading_and_depression(segs[0].orientation).depression) == pytest.approx(8.7, abs=1e-9)
    # noise-free samples along a straight are all the same reading
    assert np.ptp(log.accel, axis=0).max() < 1e-12 and np.ptp(log.mag, axis=0).max() < 1e-12


def test_segment_empty():
    log = SensorLog(np.zeros(0), np.zeros((0, 3)), np.zeros((0, 3)), ())
    assert segment_path(log, []) == []


@pytest.fixture(scope="module")
def lab_log():
    return synth_logs(lab_pipe(), NoiseSpec())


def test_segment_lab(lab_log):
    log, markers = lab_log
    segs = segment_path(log, markers)
    assert [s.kind for s in segs] == ["straight", "elbow"] * 3 + ["straight"]
    for s in segs[1::2]:
        assert s.bend_angle == pytest.approx(math.pi / 2, abs=1e-9)


@pytest.mark.parametrize("mutate, culprit", [
    (lambda ms: [ms[0], Marker(ms[1].marker_id, ms[1].odometry, "middle"), *ms[2:]], 2),
    (lambda ms: [ms[0], ms[2], ms[1], *ms[3:]], 3),
    (lambda ms: ms[1:], 2),
    (lambda ms: [m for m in ms if m.marker_id != 4], 5),
])
def test_segment_errors_name_marker(lab_log, mutate, culprit):
    log, markers = lab_log
    with pytest.raises(MarkerParseError) as exc:
        segment_path(log, mutate(list(markers)))
    assert exc.value.marker_id == culprit
    assert f"marker {culprit}" in str(exc.value)


def test_elbow_without_flanking_straights():
    with pytest.raises(DegenerateGeometryError):
        reconstruct_path([PathSegment.elbow(0.2, 1.0), PathSegment.straight(1, [1, 0, 0])])
    with pytest.raises(DegenerateGeometryError):
        reconstruct_path([PathSegment.straight(1, [1, 0, 0]), PathSegment.elbow(0.2), PathSegment.straight(1, [1, 0, 0])])


def test_reconstruct_single_straight():
    poly = reconstruct_path([PathSegment.straight(4.5, [1, 0, 0])], sample_spacing=0.1)
    np.testing.assert_allclose(poly.endpoint, [4.5, 0, 0], atol=1e-12)


def test_reconstruct_quarter_elbow():
    segs = [PathSegment.straight(1.0, [1, 0, 0]), PathSegment.elbow(math.pi / 2 * 0.1),
            PathSegment.straight(1.0, [0, 1, 0])]
    poly = reconstruct_path(segs, sample_spacing=0.01)
    np.testing.assert_allclose(poly.endpoint, [1.1, 1.1, 0], atol=1e-12)
    np.testing.assert_allclose(poly.tangents[-1], [0, 1, 0], atol=1e-12)
    # arc samples sit on the circle centred at (1, 0.1)
    arc = poly.points[poly.segment_index == 1]
    np.testing.assert_allclose(np.linalg.norm(arc[:, :2] - [1.0, 0.1], axis=1), 0.1, atol=1e-12)


def test_reconstruct_lab_length():
    poly = lab_pipe().centerline(0.02)
    assert poly.length == pytest.approx(4.57, abs=1e-6)
    assert poly.chord_length() <= poly.length + 1e-12
    assert np.all(np.linalg.norm(np.diff(poly.points, axis=0), axis=1) > 0)
    assert np.all(np.diff(poly.s) <= 0.02 + 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(0.1, 3.0), st.floats(-math.pi, math.pi), st.floats(-1.2, 1.2)),
                min_size=1, max_size=4),
       st.floats(0.05, 0.5), st.floats(0.003, 0.2))
def test_reconstruct_length_and_continuity(straights, elbow_len, spacing):
    dirs = [direction_from_angles(az, dep) for _, az, dep in straights]
    for a, b in zip(dirs, dirs[1:]):
        assume(0.05 < math.acos(np.clip(a @ b, -1, 1)) < math.pi - 0.05)
    segs = []
    for k, ((length, _, _), d) in enumerate(zip(straights, dirs)):
        if k:
            segs.append(PathSegment.elbow(elbow_len))
        segs.append(PathSegment.straight(length, d))
    total = sum(s.length for s in segs)
    poly = reconstruct_path(segs, sample_spacing=spacing)
    assert poly.length == pytest.approx(total, rel=1e-9)
    assert max(junction_tangent_residuals(poly), default=0.0) < 1e-9
    assert path_metrics(poly, poly) == (0.0, 0.0)


def test_metrics_identical(lab_log):
    poly = lab_pipe().centerline()
    assert path_metrics(poly, poly) == (0.0, 0.0)


def test_metrics_tilted_straight():
    truth = reconstruct_path([PathSegment.straight(4.57, [1, 0, 0])])
    a = math.radians(2.6)
    rec = reconstruct_path([PathSegment.straight(4.57, [math.cos(a), math.sin(a), 0])])
    m = path_metrics(rec, truth)
    assert m.max_orientation_dev == pytest.approx(a, abs=1e-9)
    assert m.length_dev == pytest.approx(0.0, abs=1e-12)


def test_metrics_length_only():
    truth = reconstruct_path([PathSegment.straight(4.57, [1, 0, 0])])
    rec = reconstruct_path([PathSegment.straight(4.47, [1, 0, 0])])
    m = path_metrics(rec, truth)
    assert m.max_orientation_dev == pytest.approx(0.0, abs=1e-12)
    assert m.length_dev == pytest.approx(0.10, abs=1e-9)


def test_metrics_zero_length_rejected():
    truth = reconstruct_path([PathSegment.straight(1.0, [1, 0, 0])])
    empty = truth.__class__(np.zeros(1), np.zeros((1, 3)), np.array([[1.0, 0, 0]]), np.zeros(1, dtype=int))
    with pytest.raises(ValueError):
        path_metrics(empty, truth)
