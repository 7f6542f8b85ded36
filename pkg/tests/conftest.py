import numpy as np
import pytest

from carmsim.geometry import (CameraIntrinsics, CameraPose,
                              ProjectiveCamera, RigConfig, build_default_rig)
from carmsim.sampling import VolumeSpec, sample_volume, filter_points

DEFAULT_SEED = 20250817


@pytest.fixture(scope="session")
def rig():
    return build_default_rig(RigConfig())


@pytest.fixture(scope="session")
def eval_points(rig):
    raw = sample_volume(VolumeSpec(), 500, DEFAULT_SEED)
    pts = filter_points(raw, rig)
    assert pts.shape[0] >= 4
    return pts


@pytest.fixture
def identity_cam():
    k = CameraIntrinsics(fx=4500, fy=4500, cx=512, cy=512)
    return ProjectiveCamera(k, CameraPose.identity())


def random_rotation(rng):
    """Uniform random rotation from a normalized quaternion."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def random_viewing_pose(rng, points, distance=None):
    """A pose that keeps `points` well in front of the camera."""
    if distance is None:
        distance = rng.uniform(500.0, 900.0)
    center = points.mean(axis=0)
    d = rng.normal(size=3)
    d /= np.linalg.norm(d)
    source = center + distance * d
    forward = (center - source)
    forward /= np.linalg.norm(forward)
    # any unit vector not parallel to forward
    up = np.array([0.0, 1.0, 0.0])
    if abs(forward @ up) > 0.9:
        up = np.array([1.0, 0.0, 0.0])
    right = np.cross(forward, up)
    right /= np.linalg.norm(right)
    down = np.cross(forward, right)
    R = np.vstack([right, down, forward])
    return CameraPose(R, -R @ source)


def rotation_angle(Ra, Rb):
    """Geodesic angle (rad) between two rotations."""
    c = (np.trace(Ra @ Rb.T) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))
