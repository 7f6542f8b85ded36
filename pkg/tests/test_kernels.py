"""The two kernel backends (numba-jitted loops, vectorized numpy) must agree
to float64 precision on random inputs."""

import subprocess
import sys

import numpy as np
import pytest

from carmsim import kernels
from carmsim.geometry import build_default_rig, RigConfig

from conftest import random_rotation


def random_pose(rng):
    R = random_rotation(rng)
    t = rng.uniform(-50, 50, 3)
    t[2] += 600.0
    return R, t


def random_P(rng):
    K = np.array([[4500.0, 0.0, 512.0],
                  [0.0, 4500.0, 512.0],
                  [0.0, 0.0, 1.0]])
    R, t = random_pose(rng)
    return K @ np.hstack([R, t[:, None]])


def test_project_batch_backends_agree():
    rng = np.random.default_rng(0)
    for _ in range(20):
        P = random_P(rng)
        pts = rng.uniform(-75, 75, (50, 3))
        px_np, z_np = kernels._project_batch_np(P, pts)
        px_lp, z_lp = kernels._project_batch_loop(P, pts)
        assert np.allclose(px_np, px_lp, atol=1e-9)
        assert np.allclose(z_np, z_lp, atol=1e-9)
        px_ac, z_ac = kernels.project_batch(P, pts)
        assert np.allclose(px_np, px_ac, atol=1e-9)
        assert np.allclose(z_np, z_ac, atol=1e-9)


def test_reproj_system_backends_agree():
    rng = np.random.default_rng(1)
    for _ in range(20):
        R, t = random_pose(rng)
        pts = rng.uniform(-75, 75, (30, 3))
        obs = rng.uniform(0, 1024, (30, 2))
        args = (R, t, 4500.0, 4510.0, 512.0, 500.0, 0.0, pts, obs)
        r_np, J_np = kernels._reproj_system_np(*args)
        r_lp, J_lp = kernels._reproj_system_loop(*args)
        assert np.allclose(r_np, r_lp, atol=1e-9)
        assert np.allclose(J_np, J_lp, atol=1e-9)
        r_ac, J_ac = kernels.reproj_system(*args)
        assert np.allclose(r_np, r_ac, atol=1e-9)
        assert np.allclose(J_np, J_ac, atol=1e-9)


def test_reproj_jacobian_matches_finite_differences():
    # sanity of the analytic Jacobian itself, independent of backends
    rng = np.random.default_rng(2)
    R, t = random_pose(rng)
    pts = rng.uniform(-60, 60, (12, 3))
    obs = rng.uniform(100, 900, (12, 2))
    fx, fy, cx, cy, skew = 4500.0, 4505.0, 512.0, 512.0, 0.0

    def residual(delta):
        w, dt = delta[:3], delta[3:]
        th = np.linalg.norm(w)
        if th < 1e-300:
            dR = np.eye(3)
        else:
            k = w / th
            Kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]],
                           [-k[1], k[0], 0]])
            dR = np.eye(3) + np.sin(th) * Kx + (1 - np.cos(th)) * Kx @ Kx
        r, _ = kernels._reproj_system_np(dR @ R, t + dt, fx, fy, cx, cy,
                                         skew, pts, obs)
        return r

    _, J = kernels._reproj_system_np(R, t, fx, fy, cx, cy, skew, pts, obs)
    eps = 1e-6
    for k in range(6):
        d = np.zeros(6)
        d[k] = eps
        fd = (residual(d) - residual(-d)) / (2 * eps)
        assert np.allclose(J[:, k], fd, atol=1e-4)


def test_triangulate_batch_backends_agree():
    rng = np.random.default_rng(3)
    rig = build_default_rig(RigConfig())
    Pa = np.hstack([rig.ap.pose.rotation,
                    rig.ap.pose.translation[:, None]])
    Pb = np.hstack([rig.lat.pose.rotation,
                    rig.lat.pose.translation[:, None]])
    xa = rng.uniform(-0.1, 0.1, (40, 2))
    xb = rng.uniform(-0.1, 0.1, (40, 2))
    X_np, s_np = kernels._triangulate_batch_np(Pa, Pb, xa, xb)
    X_lp, s_lp = kernels._triangulate_batch_loop(Pa, Pb, xa, xb)
    assert np.allclose(s_np, s_lp, atol=1e-12)
    # singular vectors are sign-ambiguous; compare dehomogenized points
    assert np.allclose(X_np / X_np[:, 3:], X_lp / X_lp[:, 3:], atol=1e-9)
    X_ac, s_ac = kernels.triangulate_batch(Pa, Pb, xa, xb)
    assert np.allclose(s_np, s_ac, atol=1e-12)
    assert np.allclose(X_np / X_np[:, 3:], X_ac / X_ac[:, 3:], atol=1e-9)


def test_backend_name_consistent():
    assert kernels.backend_name() in ("numba", "numpy")
    assert (kernels.backend_name() == "numba") == kernels.NUMBA_ENABLED


def test_env_flag_forces_numpy_backend():
    code = ("import os; os.environ['CARMSIM_NO_NUMBA'] = '1'; "
            "from carmsim import kernels; "
            "assert kernels.backend_name() == 'numpy'; "
            "assert kernels.project_batch is kernels._project_batch_np")
    subprocess.run([sys.executable, "-c", code], check=True)


def test_numpy_backend_gives_same_experiment_numbers():
    # run a tiny sweep in a subprocess with numba disabled and compare the
    # rendered CSV against the in-process result
    import json as _json
    import tempfile
    import os
    from carmsim.config import parse_config
    from carmsim.experiment import run_experiment
    from carmsim.report import render_csv

    doc = {"seed": 21,
           "points": {"mode": "volume", "n_samples": 150},
           "perturbation": {"mode": "signed-level",
                            "focal_levels_px": [300.0],
                            "pp_levels_px": [50.0],
                            "trials_per_cell": 3}}
    here = render_csv(run_experiment(parse_config(doc)))
    with tempfile.TemporaryDirectory() as td:
        cfg = os.path.join(td, "cfg.json")
        with open(cfg, "w") as fh:
            _json.dump(doc, fh)
        code = ("import os; os.environ['CARMSIM_NO_NUMBA'] = '1'; "
                "import json, sys; "
                "from carmsim.config import parse_config; "
                "from carmsim.experiment import run_experiment; "
                "from carmsim.report import render_csv; "
                "doc = json.load(open(sys.argv[1])); "
                "sys.stdout.write(render_csv(run_experiment(parse_config(doc))))")
        out = subprocess.run([sys.executable, "-c", code, cfg],
                             check=True, capture_output=True, text=True)
    # the two backends evaluate the same math but in different operation
    # order, so agreement is to float64 round-off, not byte-identical
    rows_a = [r.split(",") for r in here.strip().splitlines()[1:]]
    rows_b = [r.split(",") for r in out.stdout.strip().splitlines()[1:]]
    assert len(rows_a) == len(rows_b) == 1
    for va, vb in zip(rows_a[0], rows_b[0]):
        assert float(va) == pytest.approx(float(vb), rel=1e-9, abs=1e-12)
