"""Hot numeric kernels with two interchangeable backends.

Each kernel exists twice: a loop-oriented version compiled with numba's
``@njit`` and a vectorized pure-numpy version. The numba path is used by
default when numba imports; set the environment variable
``CARMSIM_NO_NUMBA=1`` before import to force the numpy path (useful for
debugging and as a dependency-light fallback). ``benchmarks/bench_kernels.py``
compares the two.

All kernels take plain float64 arrays; wrapping/validation lives in the
calling modules.
"""

import os

import numpy as np

NUMBA_REQUESTED = os.environ.get("CARMSIM_NO_NUMBA", "") != "1"

if NUMBA_REQUESTED:
    try:
        from numba import njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False
else:
    NUMBA_ENABLED = False


# ---------------------------------------------------------------------------
# batch projection through a 3x4 matrix whose third row is (R|t)'s third row
# (true for K with unit lower-right entry, so row 3 of P gives camera depth)

def _project_batch_np(P, pts):
    q = pts @ P[:, :3].T + P[:, 3]
    depths = q[:, 2].copy()
    px = q[:, :2] / q[:, 2:3]
    return px, depths


def _project_batch_loop(P, pts):
    n = pts.shape[0]
    px = np.empty((n, 2))
    depths = np.empty(n)
    for i in range(n):
        x, y, z = pts[i, 0], pts[i, 1], pts[i, 2]
        q0 = P[0, 0] * x + P[0, 1] * y + P[0, 2] * z + P[0, 3]
        q1 = P[1, 0] * x + P[1, 1] * y + P[1, 2] * z + P[1, 3]
        q2 = P[2, 0] * x + P[2, 1] * y + P[2, 2] * z + P[2, 3]
        px[i, 0] = q0 / q2
        px[i, 1] = q1 / q2
        depths[i] = q2
    return px, depths


# ---------------------------------------------------------------------------
# reprojection residuals + Jacobian for pose refinement
#
# Pose increment convention: R(w) = exp([w]x) @ R, t(dt) = t + dt, so for
# a = R@p the derivative of the camera-frame point q = a + t w.r.t. w is
# -[a]x and w.r.t. dt is the identity. Residual layout: (u0,v0,u1,v1,...).

def _reproj_system_np(R, t, fx, fy, cx, cy, skew, pts3, obs):
    a = pts3 @ R.T
    q = a + t
    x, y, z = q[:, 0], q[:, 1], q[:, 2]
    iz = 1.0 / z
    u = (fx * x + skew * y) * iz + cx
    v = fy * y * iz + cy
    n = pts3.shape[0]
    r = np.empty(2 * n)
    r[0::2] = u - obs[:, 0]
    r[1::2] = v - obs[:, 1]

    # du/dq and dv/dq rows
    du = np.stack([fx * iz, skew * iz, -(fx * x + skew * y) * iz * iz], axis=1)
    dv = np.stack([np.zeros(n), fy * iz, -fy * y * iz * iz], axis=1)

    # dq/dw = -[a]x (per point), dq/ddt = I
    J = np.empty((2 * n, 6))
    ax, ay, az = a[:, 0], a[:, 1], a[:, 2]
    # column k of -[a]x is the cross product derivative d(q)/d(w_k)
    # -[a]x = [[0, az, -ay], [-az, 0, ax], [ay, -ax, 0]]
    J[0::2, 0] = du[:, 1] * (-az) + du[:, 2] * ay
    J[0::2, 1] = du[:, 0] * az + du[:, 2] * (-ax)
    J[0::2, 2] = du[:, 0] * (-ay) + du[:, 1] * ax
    J[1::2, 0] = dv[:, 1] * (-az) + dv[:, 2] * ay
    J[1::2, 1] = dv[:, 0] * az + dv[:, 2] * (-ax)
    J[1::2, 2] = dv[:, 0] * (-ay) + dv[:, 1] * ax
    J[0::2, 3:6] = du
    J[1::2, 3:6] = dv
    return r, J


def _reproj_system_loop(R, t, fx, fy, cx, cy, skew, pts3, obs):
    n = pts3.shape[0]
    r = np.empty(2 * n)
    J = np.empty((2 * n, 6))
    for i in range(n):
        px, py, pz = pts3[i, 0], pts3[i, 1], pts3[i, 2]
        ax = R[0, 0] * px + R[0, 1] * py + R[0, 2] * pz
        ay = R[1, 0] * px + R[1, 1] * py + R[1, 2] * pz
        az = R[2, 0] * px + R[2, 1] * py + R[2, 2] * pz
        x = ax + t[0]
        y = ay + t[1]
        z = az + t[2]
        iz = 1.0 / z
        u = (fx * x + skew * y) * iz + cx
        v = fy * y * iz + cy
        r[2 * i] = u - obs[i, 0]
        r[2 * i + 1] = v - obs[i, 1]

        du0 = fx * iz
        du1 = skew * iz
        du2 = -(fx * x + skew * y) * iz * iz
        dv1 = fy * iz
        dv2 = -fy * y * iz * iz

        J[2 * i, 0] = du1 * (-az) + du2 * ay
        J[2 * i, 1] = du0 * az + du2 * (-ax)
        J[2 * i, 2] = du0 * (-ay) + du1 * ax
        J[2 * i, 3] = du0
        J[2 * i, 4] = du1
        J[2 * i, 5] = du2
        J[2 * i + 1, 0] = dv1 * (-az) + dv2 * ay
        J[2 * i + 1, 1] = dv2 * (-ax)
        J[2 * i + 1, 2] = dv1 * ax
        J[2 * i + 1, 3] = 0.0
        J[2 * i + 1, 4] = dv1
        J[2 * i + 1, 5] = dv2
    return r, J


# ---------------------------------------------------------------------------
# batched two-view DLT: rows built from intrinsic-normalized coordinates and
# [R|t] camera matrices, solved per point by SVD of the 4x4 system

def _triangulate_batch_np(Pa, Pb, xa, xb):
    n = xa.shape[0]
    A = np.empty((n, 4, 4))
    A[:, 0, :] = xa[:, 0:1] * Pa[2] - Pa[0]
    A[:, 1, :] = xa[:, 1:2] * Pa[2] - Pa[1]
    A[:, 2, :] = xb[:, 0:1] * Pb[2] - Pb[0]
    A[:, 3, :] = xb[:, 1:2] * Pb[2] - Pb[1]
    _, s, vt = np.linalg.svd(A)
    X = vt[:, 3, :]
    return X, s


def _triangulate_batch_loop(Pa, Pb, xa, xb):
    n = xa.shape[0]
    X = np.empty((n, 4))
    S = np.empty((n, 4))
    A = np.empty((4, 4))
    for i in range(n):
        for c in range(4):
            A[0, c] = xa[i, 0] * Pa[2, c] - Pa[0, c]
            A[1, c] = xa[i, 1] * Pa[2, c] - Pa[1, c]
            A[2, c] = xb[i, 0] * Pb[2, c] - Pb[0, c]
            A[3, c] = xb[i, 1] * Pb[2, c] - Pb[1, c]
        _, s, vt = np.linalg.svd(A)
        X[i] = vt[3]
        S[i] = s
    return X, S


if NUMBA_ENABLED:
    _project_batch_jit = njit(cache=True)(_project_batch_loop)
    _reproj_system_jit = njit(cache=True)(_reproj_system_loop)
    _triangulate_batch_jit = njit(cache=True)(_triangulate_batch_loop)
    project_batch = _project_batch_jit
    reproj_system = _reproj_system_jit
    triangulate_batch = _triangulate_batch_jit
else:
    project_batch = _project_batch_np
    reproj_system = _reproj_system_np
    triangulate_batch = _triangulate_batch_np


def backend_name():
    return "numba" if NUMBA_ENABLED else "numpy"
