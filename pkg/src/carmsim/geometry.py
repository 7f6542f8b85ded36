"""Pinhole camera model and biplanar C-arm rig construction.

World frame convention: origin at the center of the test volume, vertical
axis +y. The AP source sits on the +z axis looking at the origin; the LAT
source is rotated about +y by the configured view angle (90 deg puts it on
the +x axis). Pixel coordinates are continuous, origin at the top-left
corner, u rightward, v downward.

All values are immutable; every operation here is a pure function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BehindCamera, InvalidRigConfig
from . import kernels

MIN_DEPTH_MM = 1e-9
_ROT_TOL = 1e-9


def _freeze(a):
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CameraIntrinsics:
    """Focal lengths, principal point and skew, all in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    skew: float = 0.0

    def __post_init__(self):
        vals = (self.fx, self.fy, self.cx, self.cy, self.skew)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("intrinsics must be finite, got %r" % (vals,))
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive, got fx=%g fy=%g"
                             % (self.fx, self.fy))

    def matrix(self) -> np.ndarray:
        return np.array([
            [self.fx, self.skew, self.cx],
            [0.0, self.fy, self.cy],
            [0.0, 0.0, 1.0],
        ])


@dataclass(frozen=True, eq=False)
class CameraPose:
    """World-to-camera rigid transform: x_cam = rotation @ x_world + translation."""

    rotation: np.ndarray  # 3x3, orthonormal, det +1
    translation: np.ndarray  # 3-vector, mm

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float)
        t = np.array(self.translation, dtype=float).reshape(3)
        if R.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if not np.all(np.isfinite(R)) or not np.all(np.isfinite(t)):
            raise ValueError("pose entries must be finite")
        err = np.abs(R.T @ R - np.eye(3)).max()
        if err > _ROT_TOL:
            raise ValueError("rotation is not orthonormal (|R'R-I|=%g)" % err)
        if abs(np.linalg.det(R) - 1.0) > _ROT_TOL:
            raise ValueError("rotation must have det +1")
        object.__setattr__(self, "rotation", _freeze(R))
        object.__setattr__(self, "translation", _freeze(t))

    def matrix(self) -> np.ndarray:
        """The 3x4 [R|t] matrix."""
        return np.hstack([self.rotation, self.translation[:, None]])

    @staticmethod
    def identity() -> "CameraPose":
        return CameraPose(np.eye(3), np.zeros(3))


@dataclass(frozen=True, eq=False)
class ProjectiveCamera:
    intrinsics: CameraIntrinsics
    pose: CameraPose

    def matrix(self) -> np.ndarray:
        """Full 3x4 projection matrix K @ [R|t]."""
        return self.intrinsics.matrix() @ self.pose.matrix()

    def view_direction(self) -> np.ndarray:
        """Optical axis direction in world coordinates."""
        return self.pose.rotation[2]

    def center(self) -> np.ndarray:
        """Optical center (source position) in world coordinates."""
        return -self.pose.rotation.T @ self.pose.translation


def projection_matrix(camera: ProjectiveCamera) -> np.ndarray:
    return camera.matrix()


def project(camera: ProjectiveCamera, point) -> np.ndarray:
    """Project one 3D point (mm) to pixel coordinates.

    Raises BehindCamera when the camera-frame depth is <= 1e-9 mm.
    """
    p = np.asarray(point, dtype=float).reshape(3)
    q = camera.pose.rotation @ p + camera.pose.translation
    if q[2] <= MIN_DEPTH_MM:
        raise BehindCamera("point depth %g mm is not positive" % q[2])
    k = camera.intrinsics
    u = (k.fx * q[0] + k.skew * q[1]) / q[2] + k.cx
    v = k.fy * q[1] / q[2] + k.cy
    return np.array([u, v])


def project_many(camera: ProjectiveCamera, points):
    """Batch projection. Returns (n,2) pixels and (n,) camera depths.

    Does not raise for non-positive depths; callers filter on the returned
    depth array.
    """
    pts = np.ascontiguousarray(points, dtype=float)
    return kernels.project_batch(camera.matrix(), pts)


@dataclass(frozen=True, eq=False)
class BiplanarRig:
    ap: ProjectiveCamera
    lat: ProjectiveCamera
    image_width: int
    image_height: int
    pixel_spacing: float  # mm/pixel

    def __post_init__(self):
        if self.image_width <= 0 or self.image_height <= 0:
            raise ValueError("image dimensions must be positive")
        if self.pixel_spacing <= 0:
            raise ValueError("pixel spacing must be positive")
        cosang = float(np.clip(
            self.ap.view_direction() @ self.lat.view_direction(), -1.0, 1.0))
        angle = math.degrees(math.acos(cosang))
        if angle < 10.0 - 1e-9:
            raise ValueError(
                "view axes are only %.2f deg apart (need >= 10)" % angle)


@dataclass(frozen=True)
class RigConfig:
    fx_ap: float = 4500.0
    fx_lat: float = 4550.0
    image_width: int = 1024
    image_height: int = 1024
    pixel_spacing: float = 0.21
    source_distance_ap: float = 400.0
    source_distance_lat: float = 370.0
    view_angle_deg: float = 90.0


def _look_at_pose(source: np.ndarray) -> CameraPose:
    """World-to-camera pose for a camera at `source` aimed at the origin.

    Camera z points from source to origin; the world's vertical (+y) maps
    to the image's upward direction (v grows downward).
    """
    forward = -source / np.linalg.norm(source)
    up = np.array([0.0, 1.0, 0.0])
    right = np.cross(forward, up)
    nr = np.linalg.norm(right)
    if nr < 1e-12:
        raise InvalidRigConfig("source on the vertical axis is unsupported")
    right /= nr
    down = np.cross(forward, right)
    R = np.vstack([right, down, forward])
    return CameraPose(R, -R @ source)


def build_default_rig(config: RigConfig) -> BiplanarRig:
    """Construct the ground-truth two-view rig from a configuration.

    Deterministic: identical config yields a bit-identical rig.
    """
    c = config
    for name in ("fx_ap", "fx_lat", "pixel_spacing",
                 "source_distance_ap", "source_distance_lat"):
        v = getattr(c, name)
        if not (math.isfinite(v) and v > 0):
            raise InvalidRigConfig("%s must be positive, got %r" % (name, v))
    if c.image_width <= 0 or c.image_height <= 0:
        raise InvalidRigConfig("image dimensions must be positive")
    if not 10.0 < c.view_angle_deg < 170.0:
        raise InvalidRigConfig(
            "view angle must be in (10, 170) deg, got %g" % c.view_angle_deg)

    cx = c.image_width / 2.0
    cy = c.image_height / 2.0
    k_ap = CameraIntrinsics(c.fx_ap, c.fx_ap, cx, cy)
    k_lat = CameraIntrinsics(c.fx_lat, c.fx_lat, cx, cy)

    src_ap = np.array([0.0, 0.0, c.source_distance_ap])
    theta = math.radians(c.view_angle_deg)
    src_lat = c.source_distance_lat * np.array(
        [math.sin(theta), 0.0, math.cos(theta)])

    return BiplanarRig(
        ap=ProjectiveCamera(k_ap, _look_at_pose(src_ap)),
        lat=ProjectiveCamera(k_lat, _look_at_pose(src_lat)),
        image_width=c.image_width,
        image_height=c.image_height,
        pixel_spacing=c.pixel_spacing,
    )
