import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flipchip.errors import EmptySelectionError, FlipchipError, UnlevelableError
from flipchip.heightmap import (
    Corner,
    CornerSet,
    HeightMap,
    LineScan,
    auto_bottom_region,
    bow,
    corner_tilt_worst_case,
    crop_top_chip,
    fit_plane,
    level_to_bottom_plane,
    mask_artifact_scans,
    process_map,
    summarize_chip,
)
from flipchip.synthetic import device_map


def test_fit_plane_exact():
    rng = np.random.default_rng(0)
    x, y = rng.uniform(0, 1e4, 50), rng.uniform(0, 1e4, 50)
    plane = fit_plane(x, y, 3e-4 * x - 2e-4 * y + 7.0)
    assert (plane.a, plane.b, plane.c) == pytest.approx((3e-4, -2e-4, 7.0), rel=1e-9)
    assert plane.tilt_urad == pytest.approx(1e6 * math.atan(math.hypot(3e-4, 2e-4)), rel=1e-9)


def test_fit_plane_degenerate():
    with pytest.raises(UnlevelableError):
        fit_plane([0, 1], [0, 1], [0, 1])
    with pytest.raises(UnlevelableError):
        fit_plane([0, 1, 2, 3], [0, 1, 2, 3], [0, 1, 2, 3])


def test_points_round_trip_with_nan():
    hm = device_map(pitch=500.0, top_size=3000.0, margin=500.0)
    z = hm.z.copy()
    z[2, 3] = np.nan
    hm = hm.replace(z=z)
    back = HeightMap.from_points(*hm.to_points())
    np.testing.assert_array_equal(back.z, hm.z)
    assert (back.x_pitch, back.y_pitch, back.origin) == (hm.x_pitch, hm.y_pitch, hm.origin)


def test_scans_round_trip():
    hm = device_map(pitch=500.0, top_size=3000.0, margin=500.0)
    scans = hm.scans()
    assert len(scans) == hm.shape[1]
    np.testing.assert_array_equal(HeightMap.from_scans(scans).z, hm.z)
    with pytest.raises(FlipchipError):
        LineScan(0, 0.0, [[1.0, 0.0], [0.5, 0.0]])


def test_leveling_removes_stage_tilt():
    hm = device_map(pitch=100.0, top_size=5000.0, separation=10.0, bottom_slope=(4e-4, -3e-4), bottom_offset=12.0)
    leveled = level_to_bottom_plane(hm)
    bottom = auto_bottom_region(hm)
    assert np.allclose(leveled.z[bottom], 0.0, atol=1e-9)
    top = crop_top_chip(leveled)
    assert np.allclose(top.z[top.valid], 535.2, atol=1e-9)


def test_explicit_bottom_rectangles():
    hm = device_map(pitch=100.0, top_size=5000.0, margin=500.0, bottom_slope=(2e-4, 1e-4))
    leveled = level_to_bottom_plane(hm, bottom_region=[(0, 300, 0, 6000), (5700, 6000, 0, 6000)])
    assert leveled.plane.a == pytest.approx(2e-4, rel=1e-9)
    assert leveled.plane.b == pytest.approx(1e-4, rel=1e-9)


def test_crop_requires_step():
    hm = HeightMap(np.zeros((5, 5)), 1.0, 1.0)
    with pytest.raises(EmptySelectionError):
        crop_top_chip(hm, 400.0)


def test_masks_single_and_adjacent_artifacts():
    hm = device_map(pitch=100.0, top_size=5000.0, artifact_columns=(20, 30, 31), artifact_offset=5.0)
    top = crop_top_chip(level_to_bottom_plane(hm))
    masked = mask_artifact_scans(top)
    assert set(masked.masked_x) == {2000.0, 3000.0, 3100.0}
    assert np.isnan(masked.z[:, np.isin(masked.x, masked.masked_x)]).all()


def test_clean_map_masks_nothing():
    hm = device_map(pitch=100.0, top_size=5000.0, tilt_urad=150.0, bow_um=1.0, noise_sigma=0.05, rng=1)
    masked = mask_artifact_scans(crop_top_chip(level_to_bottom_plane(hm)))
    assert masked.masked_x == ()


def test_artifact_scans_do_not_bias_leveling():
    kw = dict(pitch=100.0, top_size=6000.0, separation=10.0, tilt_urad=80.0, noise_sigma=0.02, rng=3)
    clean = process_map(device_map(**kw))[2]
    dirty = process_map(device_map(artifact_columns=(12, 40), artifact_offset=-6.0, **kw))[2]
    assert dirty.n_masked_scans == 2
    assert dirty.tilt == pytest.approx(clean.tilt, abs=1.0)
    assert dirty.mean_separation == pytest.approx(clean.mean_separation, abs=0.01)


def test_bow_sign_and_magnitude():
    up = process_map(device_map(pitch=100.0, top_size=8000.0, bow_um=1.0))[2]
    down = process_map(device_map(pitch=100.0, top_size=8000.0, bow_um=-1.0))[2]
    assert up.bow > 0.5
    assert down.bow == pytest.approx(-up.bow, rel=1e-9)
    assert up.mean_separation == pytest.approx(10.0, abs=1e-9)


def test_summary_dict_keys():
    _, top, summary = process_map(device_map(pitch=200.0, top_size=4000.0))
    d = summary.as_dict()
    assert {"mean_separation_um", "tilt_urad", "bow_um", "masked_columns", "plane"} <= set(d)
    assert set(d["plane"]) == {"a", "b", "c"}


@settings(max_examples=15, deadline=None)
@given(
    st.floats(min_value=0.0, max_value=400.0),
    st.floats(min_value=0.0, max_value=360.0),
    st.floats(min_value=-1e-3, max_value=1e-3),
    st.floats(min_value=-1e-3, max_value=1e-3),
    st.floats(min_value=2.0, max_value=30.0),
)
def test_recovery_is_independent_of_stage_tilt(tilt, direction, sx, sy, sep):
    hm = device_map(
        pitch=200.0, top_size=6000.0, separation=sep, tilt_urad=tilt, tilt_direction_deg=direction, bottom_slope=(sx, sy)
    )
    s = process_map(hm)[2]
    assert s.tilt == pytest.approx(tilt, abs=1e-6)
    assert s.mean_separation == pytest.approx(sep, abs=1e-9)


def test_summarize_needs_data():
    hm = HeightMap(np.full((4, 4), np.nan), 1.0, 1.0)
    with pytest.raises(UnlevelableError):
        summarize_chip(hm)


# corners ---------------------------------------------------------------
def _plane_corners(lx, ly, gx, gy, z0=10.0):
    pts = [("a", 0, 0), ("b", lx, 0), ("c", 0, ly), ("d", lx, ly)]
    return CornerSet(tuple(Corner(n, x, y, z0 + gx * x + gy * y) for n, x, y in pts))


@given(
    st.floats(min_value=0.0, max_value=1e-3),
    st.floats(min_value=0.0, max_value=2 * math.pi),
    st.floats(min_value=2000.0, max_value=15000.0),
    st.floats(min_value=2000.0, max_value=15000.0),
)
def test_corner_tilt_bounded_by_plane_tilt(g, theta, lx, ly):
    corners = _plane_corners(lx, ly, g * math.cos(theta), g * math.sin(theta))
    worst = corner_tilt_worst_case(corners).worst_tilt_urad
    plane_tilt = 1e6 * math.atan(g)
    assert worst <= plane_tilt * (1 + 1e-9) + 1e-9
    # on a rectangle the worst pair direction is within 45 degrees of the gradient
    assert worst >= math.cos(math.pi / 4) * plane_tilt * (1 - 1e-9) - 1e-9


def test_square_corner_tilt_lower_bound():
    # the square case is tighter: some pair lies within 22.5 degrees of the gradient
    for theta in np.linspace(0, 2 * math.pi, 73):
        corners = _plane_corners(1e4, 1e4, 1e-4 * math.cos(theta), 1e-4 * math.sin(theta))
        worst = corner_tilt_worst_case(corners).worst_tilt_urad
        assert worst >= math.cos(math.pi / 8) * 100.0 * (1 - 1e-6)


def test_corner_set_validation():
    with pytest.raises(FlipchipError):
        CornerSet((Corner("a", 0, 0, 1), Corner("b", 1, 0, 1), Corner("c", 0, 1, 1)))
    with pytest.raises(FlipchipError):
        CornerSet((Corner("a", 0, 0, 1), Corner("b", 0, 0, 1), Corner("c", 0, 1, 1), Corner("d", 1, 1, 1)))


def test_flat_corners_zero_tilt():
    res = corner_tilt_worst_case(_plane_corners(1e4, 1e4, 0.0, 0.0, z0=11.0))
    assert res.worst_tilt_urad == 0.0
    assert res.mean_separation == 11.0
    assert len(res.pair_tilts_urad) == 6


def test_bow_of_flat_map_is_zero():
    hm = HeightMap(np.full((11, 11), 5.0), 10.0, 10.0)
    assert bow(hm, fit_plane(*[a.ravel() for a in hm.grid()], hm.z.ravel())) == pytest.approx(0.0, abs=1e-12)
