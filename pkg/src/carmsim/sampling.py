"""Test-point generation inside the shared field of view.

Provides uniform box sampling, the two visibility filters (edge exclusion
and AP/LAT separation), and the deterministic 32-marker synthetic phantom.
All randomness comes from explicitly passed seeds (numpy PCG64 via
``default_rng``); no global RNG state is touched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LayoutNotVisible
from .geometry import BiplanarRig, project_many


@dataclass(frozen=True)
class VolumeSpec:
    """Axis-aligned sampling box, millimeters."""

    center: tuple = (0.0, 0.0, 0.0)
    half_extent: tuple = (75.0, 75.0, 75.0)

    def __post_init__(self):
        c = tuple(float(v) for v in self.center)
        h = tuple(float(v) for v in self.half_extent)
        if len(c) != 3 or len(h) != 3:
            raise ValueError("center and half_extent must be 3-vectors")
        if any(v <= 0 for v in h):
            raise ValueError("half_extent must be strictly positive")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "half_extent", h)


@dataclass(frozen=True)
class FilterSpec:
    edge_margin: float = 40.0  # px, min RMS distance to the image border
    min_disparity: float = 40.0  # px, min AP/LAT pixel separation

    def __post_init__(self):
        if self.edge_margin < 0 or self.min_disparity < 0:
            raise ValueError("filter thresholds must be >= 0")


def sample_volume(spec: VolumeSpec, n: int, seed) -> np.ndarray:
    """n i.i.d. uniform points in the box; deterministic for a fixed seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    c = np.array(spec.center)
    h = np.array(spec.half_extent)
    return c + rng.uniform(-1.0, 1.0, size=(n, 3)) * h


def projection_metrics(points, rig: BiplanarRig):
    """Per-point visibility data used by the filters and the sample CLI.

    Returns a dict of arrays: px_ap, px_lat (n,2), edge_score, disparity,
    inside (bool: positive depth and projection inside both images).
    """
    pts = np.asarray(points, float).reshape(-1, 3)
    px_ap, z_ap = project_many(rig.ap, pts)
    px_lat, z_lat = project_many(rig.lat, pts)
    w, h = float(rig.image_width), float(rig.image_height)

    def border_dist(px):
        return np.minimum.reduce([px[:, 0], w - px[:, 0],
                                  px[:, 1], h - px[:, 1]])

    d_ap = border_dist(px_ap)
    d_lat = border_dist(px_lat)
    inside = (z_ap > 0) & (z_lat > 0) & (d_ap > 0) & (d_lat > 0)
    # worst-view border distance: a point too close to the edge in either
    # view is unreliable there, so the score must not be averaged up by the
    # other view
    edge_score = np.minimum(d_ap, d_lat)
    disparity = np.linalg.norm(px_ap - px_lat, axis=1)
    return {
        "px_ap": px_ap,
        "px_lat": px_lat,
        "edge_score": edge_score,
        "disparity": disparity,
        "inside": inside,
    }


def filter_points(points, rig: BiplanarRig,
                  filters: FilterSpec = FilterSpec()) -> np.ndarray:
    """Keep points visible in both views, at least edge_margin pixels from
    every image border and with AP/LAT pixel disparity >= min_disparity.

    Order-preserving; may return an empty array.
    """
    pts = np.asarray(points, float).reshape(-1, 3)
    if pts.shape[0] == 0:
        return pts
    m = projection_metrics(pts, rig)
    keep = (m["inside"]
            & (m["edge_score"] >= filters.edge_margin)
            & (m["disparity"] >= filters.min_disparity))
    return pts[keep]


@dataclass(frozen=True)
class PhantomLayout:
    """Two parallel marker grids: rows x cols at `pitch` spacing, the two
    planes `plane_separation` apart along z, centered on `center`."""

    rows: int = 4
    cols: int = 4
    pitch: float = 40.0  # mm
    plane_separation: float = 60.0  # mm
    center: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid dimensions must be >= 1")
        if self.pitch <= 0 or self.plane_separation <= 0:
            raise ValueError("pitch and plane separation must be positive")
        c = tuple(float(v) for v in self.center)
        if len(c) != 3:
            raise ValueError("center must be a 3-vector")
        object.__setattr__(self, "center", c)

    @property
    def n_markers(self):
        return 2 * self.rows * self.cols


def phantom_points(layout: PhantomLayout, rig: BiplanarRig = None,
                   filters: FilterSpec = FilterSpec()) -> np.ndarray:
    """Deterministic marker coordinates of the synthetic phantom.

    When a rig is supplied every marker must pass ``filter_points`` under
    it, otherwise LayoutNotVisible is raised.
    """
    xs = (np.arange(layout.cols) - (layout.cols - 1) / 2.0) * layout.pitch
    ys = (np.arange(layout.rows) - (layout.rows - 1) / 2.0) * layout.pitch
    zs = np.array([-0.5, 0.5]) * layout.plane_separation
    gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)
    pts = pts + np.array(layout.center)
    if rig is not None:
        kept = filter_points(pts, rig, filters)
        if kept.shape[0] != pts.shape[0]:
            raise LayoutNotVisible(
                "%d of %d phantom markers fail the visibility filters"
                % (pts.shape[0] - kept.shape[0], pts.shape[0]))
    return pts
