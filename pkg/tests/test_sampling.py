import numpy as np
import pytest

from carmsim.errors import LayoutNotVisible
from carmsim.geometry import RigConfig, build_default_rig, project
from carmsim.sampling import (FilterSpec, PhantomLayout, VolumeSpec,
                              filter_points, phantom_points,
                              projection_metrics, sample_volume)
from carmsim.solvers import triangulate_linear


def test_sample_volume_bounds():
    pts = sample_volume(VolumeSpec(), 500, 1)
    assert pts.shape == (500, 3)
    assert np.all(np.abs(pts) <= 75.0)


def test_sample_volume_deterministic():
    a = sample_volume(VolumeSpec(), 1, 42)
    b = sample_volume(VolumeSpec(), 1, 42)
    assert np.array_equal(a, b)


def test_sample_volume_off_center():
    spec = VolumeSpec(center=(10, 20, 30), half_extent=(5, 5, 5))
    pts = sample_volume(spec, 200, 0)
    assert np.all(pts >= [5, 15, 25]) and np.all(pts <= [15, 25, 35])


def test_degenerate_volume_rejected():
    with pytest.raises(ValueError):
        VolumeSpec(half_extent=(75, 0, 75))


def test_filter_thresholds_validated():
    with pytest.raises(ValueError):
        FilterSpec(edge_margin=-1)


def test_zero_disparity_excluded(rig):
    # the world origin projects to the principal point in both views:
    # 512 px from every border but zero disparity
    origin = np.zeros((1, 3))
    m = projection_metrics(origin, rig)
    assert np.allclose(m["px_ap"][0], [512, 512], atol=1e-9)
    assert np.allclose(m["px_lat"][0], [512, 512], atol=1e-9)
    assert m["disparity"][0] < 1e-9
    assert filter_points(origin, rig).shape[0] == 0


def test_edge_margin_excludes_near_border_points(rig):
    # walk a point along the AP image's u axis until it projects 30 px from
    # the border; it must be excluded whatever its disparity
    cam = rig.ap
    src = cam.center()
    K = cam.intrinsics.matrix()
    ray = cam.pose.rotation.T @ np.linalg.inv(K) @ np.array([30.0, 512.0, 1.0])
    point = src + 400.0 * ray
    assert abs(project(cam, point)[0] - 30.0) < 1e-9
    kept = filter_points(point[None, :], rig)
    assert kept.shape[0] == 0


def test_retained_count_regime(rig):
    pts = sample_volume(VolumeSpec(), 500, 20250817)
    kept = filter_points(pts, rig)
    assert 40 <= kept.shape[0] <= 120


def test_filter_idempotent(rig):
    pts = sample_volume(VolumeSpec(), 500, 5)
    once = filter_points(pts, rig)
    twice = filter_points(once, rig)
    assert np.array_equal(once, twice)


def test_filter_order_preserved(rig):
    pts = sample_volume(VolumeSpec(), 200, 6)
    kept = filter_points(pts, rig)
    idx = [np.flatnonzero((pts == k).all(axis=1))[0] for k in kept]
    assert idx == sorted(idx)


@pytest.mark.parametrize("edge,disp", [(60, 40), (40, 60), (80, 80)])
def test_filter_monotone_in_thresholds(rig, edge, disp):
    pts = sample_volume(VolumeSpec(), 500, 7)
    base = filter_points(pts, rig, FilterSpec(40, 40))
    tighter = filter_points(pts, rig, FilterSpec(edge, disp))
    assert tighter.shape[0] <= base.shape[0]


def test_retained_points_triangulate_back(rig):
    pts = sample_volume(VolumeSpec(), 100, 8)
    kept = filter_points(pts, rig)
    for p in kept:
        rec = triangulate_linear(rig.ap, rig.lat,
                                 project(rig.ap, p), project(rig.lat, p))
        assert np.abs(rec - p).max() < 1e-9


def phantom_rig():
    return build_default_rig(RigConfig(fx_ap=4800, fx_lat=4850,
                                       source_distance_ap=800,
                                       source_distance_lat=750))


def test_phantom_default_32_distinct():
    pts = phantom_points(PhantomLayout())
    assert pts.shape == (32, 3)
    assert len({tuple(p) for p in pts}) == 32


def test_phantom_centroid_at_center():
    pts = phantom_points(PhantomLayout())
    assert np.abs(pts.mean(axis=0)).max() < 1e-9


def test_phantom_visible_under_phantom_rig():
    pts = phantom_points(PhantomLayout(), phantom_rig())
    assert pts.shape[0] == 32


def test_phantom_translated_not_visible():
    layout = PhantomLayout(center=(500.0, 0.0, 0.0))
    with pytest.raises(LayoutNotVisible):
        phantom_points(layout, phantom_rig())


def test_phantom_deterministic():
    assert np.array_equal(phantom_points(PhantomLayout()),
                          phantom_points(PhantomLayout()))
