import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sparselattice.errors import DegeneratePath, SchemaError
from sparselattice.geometry import (Polyline, arclength_stations, Pose2D, SampledPath, curvature_profile,
                                    normalize_to_origin, read_paths_csv, read_sampled_csv,
                                    resample_by_arclength, slice_sliding_windows, wrap_angle,
                                    write_paths_csv)


def circle(R, n, delta, ccw=True):
    phi = np.arange(n) * delta / R
    sgn = 1 if ccw else -1
    return np.column_stack([R * np.sin(phi), sgn * R * (1 - np.cos(phi))])


def test_resample_uniform():
    sp = resample_by_arclength(np.array([[0, 0], [1, 0]]), 0.25)
    np.testing.assert_allclose(sp.points[:, 0], [0, 0.25, 0.5, 0.75, 1.0])


def test_resample_short_tail_merges_into_last_segment():
    sp = resample_by_arclength(np.array([[0, 0], [1.1, 0]]), 0.25)
    assert len(sp) == 5
    assert sp.points[-1, 0] == pytest.approx(1.1)


def test_resample_long_tail_kept():
    sp = resample_by_arclength(np.array([[0, 0], [1.2, 0]]), 0.25)
    np.testing.assert_allclose(sp.points[:, 0], [0, 0.25, 0.5, 0.75, 1.0, 1.2])


def test_quarter_circle():
    phi = np.linspace(0, math.pi / 2, 2001)
    sp = resample_by_arclength(np.column_stack([np.cos(phi), np.sin(phi)]), 0.1)
    # length 1.5708: 15 full steps leave a tail of 0.0708 >= delta/2
    assert len(sp) == 17
    chords = np.hypot(*np.diff(sp.points, axis=0).T)
    np.testing.assert_allclose(chords[:-1], 0.1, atol=1e-3)


def test_resample_degenerate():
    with pytest.raises(DegeneratePath):
        resample_by_arclength(np.array([[0, 0], [0.04, 0]]), 0.1)
    with pytest.raises(ValueError):
        Polyline(np.array([[0.0, 0.0]]))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 0.5))
def test_resample_length_close_to_input(seed, delta):
    # gently turning polyline; chords only cut corners by O(delta^2 * curvature)
    rng = np.random.default_rng(seed)
    th = np.cumsum(rng.uniform(-0.3, 0.3, size=12))
    step = rng.uniform(0.5, 1.5, size=12)[:, None]
    pts = np.vstack([[0.0, 0.0], np.cumsum(step * np.column_stack([np.cos(th), np.sin(th)]), axis=0)])
    poly = Polyline.from_points(pts)
    sp = resample_by_arclength(poly, delta)
    assert abs(sp.arc_length - poly.length) < delta / 2
    assert arclength_stations(poly.length, delta)[-1] == poly.length
    np.testing.assert_allclose(sp.points[-1], poly.points[-1])


def test_curvature_straight_zero():
    sp = resample_by_arclength(np.array([[0, 0], [3, 4]]), 0.1)
    assert np.all(curvature_profile(sp) == 0)


@pytest.mark.parametrize("ccw,sign", [(True, 1), (False, -1)])
def test_curvature_circle(ccw, sign):
    sp = SampledPath(circle(5.0, 30, 0.5, ccw), 0.5)
    np.testing.assert_allclose(curvature_profile(sp), sign * 0.2, rtol=0.01)


def test_curvature_needs_three_points():
    with pytest.raises(DegeneratePath):
        curvature_profile(SampledPath(np.array([[0, 0], [1, 0]]), 1.0))


def test_slices():
    sp = resample_by_arclength(np.array([[0, 0], [12, 0]]), 0.1)
    sl = slice_sliding_windows(sp, 10.0, 1.0)
    assert len(sl) == 3
    np.testing.assert_allclose([s.points[0, 0] for s in sl], [0, 1, 2], atol=1e-12)
    assert all(len(s) == 101 for s in sl)
    assert slice_sliding_windows(resample_by_arclength(np.array([[0, 0], [9, 0]]), 0.1), 10, 1) == []
    ten = resample_by_arclength(np.array([[0, 0], [10, 0]]), 0.1)
    (only,) = slice_sliding_windows(ten, 10, 1)
    assert only.equals(ten)


def test_normalize():
    sp = SampledPath(np.vstack([[[0.0, 0.0]], circle(3.0, 20, 0.1) + (0.1, 0.0)]), 0.1)
    assert normalize_to_origin(sp).equals(sp, atol=1e-12)
    moved = sp.transformed(3.0, 4.0, math.pi / 2)
    assert moved.headings[0] == pytest.approx(math.pi / 2)
    back = normalize_to_origin(moved)
    np.testing.assert_allclose(back.points[0], 0.0)
    assert back.headings[0] == 0.0
    assert back.arc_length == pytest.approx(moved.arc_length)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_normalize_preserves_distances_and_is_idempotent(seed):
    rng = np.random.default_rng(seed)
    pts = np.cumsum(rng.uniform(0.2, 1, size=(10, 2)) * rng.choice([-1, 1], size=(10, 2)), axis=0)
    sp = SampledPath(pts, 0.5)
    out = normalize_to_origin(sp)
    D0 = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    D1 = np.linalg.norm(out.points[:, None] - out.points[None], axis=-1)
    np.testing.assert_allclose(D0, D1, atol=1e-9)
    assert normalize_to_origin(out).equals(out, atol=1e-12)


def test_wrap_angle_range():
    x = np.linspace(-20, 20, 1001)
    w = wrap_angle(x)
    assert np.all(w > -math.pi) and np.all(w <= math.pi)
    np.testing.assert_allclose(np.sin(w), np.sin(x), atol=1e-12)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert Pose2D(0, 0, 3 * math.pi).theta == pytest.approx(math.pi)


def test_csv_roundtrip(tmp_path):
    a = resample_by_arclength(np.array([[0, 0], [2, 1]]), 0.1)
    b = SampledPath(circle(4.0, 12, 0.1), 0.1)
    f = tmp_path / "p.csv"
    write_paths_csv([("a", a), ("b", b)], f)
    back = read_sampled_csv(f, 0.1)
    assert list(back) == ["a", "b"]
    assert back["a"].equals(a) and back["b"].equals(b)
    raw = read_paths_csv(f)
    np.testing.assert_array_equal(raw["b"].points, b.points)


def test_csv_missing_header(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("1,0.0,0.0\n1,1.0,0.0\n")
    with pytest.raises(SchemaError, match="missing header path_id,x,y"):
        read_paths_csv(f)
