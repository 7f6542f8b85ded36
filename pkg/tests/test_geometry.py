import numpy as np
import pytest

from carmsim.errors import BehindCamera, InvalidRigConfig
from carmsim.geometry import (CameraIntrinsics, CameraPose, ProjectiveCamera,
                              RigConfig, build_default_rig, project,
                              project_many, projection_matrix)

from conftest import random_rotation


def test_projection_matrix_identity_case():
    cam = ProjectiveCamera(CameraIntrinsics(1, 1, 0, 0),
                           CameraPose.identity())
    P = projection_matrix(cam)
    assert np.allclose(P[:, :3], np.eye(3))
    assert np.allclose(P[:, 3], 0)


def test_projection_matrix_direct_composition():
    cam = ProjectiveCamera(CameraIntrinsics(4500, 4500, 512, 512),
                           CameraPose.identity())
    P = projection_matrix(cam)
    assert np.allclose(P[0], [4500, 0, 512, 0])
    assert np.linalg.matrix_rank(P) == 3


def test_rank_deficient_rotation_rejected():
    R = np.eye(3)
    R[2, 2] = 0.0
    with pytest.raises(ValueError):
        CameraPose(R, np.zeros(3))


def test_reflection_rotation_rejected():
    with pytest.raises(ValueError):
        CameraPose(np.diag([1.0, 1.0, -1.0]), np.zeros(3))


def test_project_optical_axis_hits_principal_point(identity_cam):
    px = project(identity_cam, [0, 0, 945])
    assert np.allclose(px, [512, 512], atol=1e-12)


def test_project_hand_evaluated_pinhole(identity_cam):
    # u = cx + fx * x / z
    px = project(identity_cam, [10, 0, 945])
    assert np.allclose(px, [512 + 4500 * 10 / 945, 512], atol=1e-9)


def test_project_behind_camera(identity_cam):
    with pytest.raises(BehindCamera):
        project(identity_cam, [0, 0, -100])


def test_project_many_matches_scalar(rig):
    pts = np.array([[10.0, -20.0, 30.0], [0.0, 5.0, -40.0]])
    px, depths = project_many(rig.ap, pts)
    for i in range(2):
        assert np.allclose(px[i], project(rig.ap, pts[i]), atol=1e-9)
    assert np.all(depths > 0)


@pytest.mark.parametrize("lam", [0.5, 2.0, 10.0])
def test_projection_scale_invariance(rig, lam):
    # projecting via lam*P must give identical pixels
    P = rig.ap.matrix()
    pts = np.random.default_rng(3).uniform(-60, 60, size=(20, 3))
    for p in pts:
        q = P @ np.append(p, 1.0)
        qs = (lam * P) @ np.append(p, 1.0)
        assert np.allclose(q[:2] / q[2], qs[:2] / qs[2], atol=1e-9)


def test_backprojected_ray_roundtrip(rig):
    # a point on the back-projected ray of (u, v) reprojects to (u, v)
    rng = np.random.default_rng(7)
    cam = rig.lat
    K = cam.intrinsics.matrix()
    Kinv = np.linalg.inv(K)
    src = cam.center()
    for _ in range(20):
        uv = rng.uniform(100, 900, size=2)
        ray_cam = Kinv @ np.append(uv, 1.0)
        ray_world = cam.pose.rotation.T @ ray_cam
        depth = rng.uniform(100, 800)
        point = src + depth * ray_world
        assert np.allclose(project(cam, point), uv, atol=1e-9)


def test_build_default_rig_reference_constants():
    rig = build_default_rig(RigConfig())
    assert rig.ap.intrinsics.fx == 4500
    assert rig.lat.intrinsics.fx == 4550
    assert rig.ap.intrinsics.cx == 512 and rig.ap.intrinsics.cy == 512
    assert rig.image_width == 1024 and rig.image_height == 1024
    assert rig.pixel_spacing == 0.21


def test_build_phantom_mode_focals():
    rig = build_default_rig(RigConfig(fx_ap=4800, fx_lat=4850))
    assert rig.ap.intrinsics.fx == 4800
    assert rig.lat.intrinsics.fx == 4850


def test_build_rig_orthogonal_views():
    rig = build_default_rig(RigConfig())
    cosang = rig.ap.view_direction() @ rig.lat.view_direction()
    assert abs(cosang) < 1e-12  # 90 degrees


def test_build_rig_deterministic():
    a = build_default_rig(RigConfig())
    b = build_default_rig(RigConfig())
    assert np.array_equal(a.ap.matrix(), b.ap.matrix())
    assert np.array_equal(a.lat.matrix(), b.lat.matrix())


@pytest.mark.parametrize("angle", [0.0, 5.0, 175.0, 180.0])
def test_degenerate_view_angle_rejected(angle):
    with pytest.raises(InvalidRigConfig):
        build_default_rig(RigConfig(view_angle_deg=angle))


def test_nonpositive_config_rejected():
    with pytest.raises(InvalidRigConfig):
        build_default_rig(RigConfig(source_distance_ap=-1))
    with pytest.raises(InvalidRigConfig):
        build_default_rig(RigConfig(pixel_spacing=0))


def test_sources_are_noncoincident():
    rig = build_default_rig(RigConfig())
    assert np.allclose(rig.ap.center(), [0, 0, 400], atol=1e-9)
    assert np.allclose(rig.lat.center(), [370, 0, 0], atol=1e-9)


def test_intrinsics_invariants():
    with pytest.raises(ValueError):
        CameraIntrinsics(-1, 1, 0, 0)
    with pytest.raises(ValueError):
        CameraIntrinsics(1, 1, np.nan, 0)


def test_random_rotations_accepted():
    rng = np.random.default_rng(11)
    for _ in range(10):
        R = random_rotation(rng)
        CameraPose(R, np.zeros(3))  # does not raise
