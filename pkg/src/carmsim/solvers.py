"""Pose estimation, two-view triangulation and rigid point-set alignment.

The PnP solver follows the EPnP recipe: express the points in barycentric
coordinates of four control points (three in the planar case), recover the
control points in the camera frame from the null space of the projection
constraints, resolve the null-space mixing coefficients from inter-control-
point distances (closed-form cases N=1..3 plus Gauss-Newton polish), then
lift the pose with a Kabsch fit. The result is refined by damped
Gauss-Newton on the reprojection error.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import kernels
from .errors import AtInfinity, DegenerateConfiguration, IllConditioned
from .geometry import CameraIntrinsics, CameraPose, ProjectiveCamera


@dataclass(frozen=True, eq=False)
class Correspondences:
    """Paired 3D (mm) and 2D (pixel) observations of the same landmarks."""

    points3: np.ndarray  # (n, 3)
    points2: np.ndarray  # (n, 2)

    def __post_init__(self):
        p3 = np.ascontiguousarray(self.points3, dtype=float)
        p2 = np.ascontiguousarray(self.points2, dtype=float)
        if p3.ndim != 2 or p3.shape[1] != 3:
            raise ValueError("points3 must be (n, 3)")
        if p2.ndim != 2 or p2.shape[1] != 2:
            raise ValueError("points2 must be (n, 2)")
        if p3.shape[0] != p2.shape[0]:
            raise ValueError("points3 and points2 must have equal length")
        if not (np.all(np.isfinite(p3)) and np.all(np.isfinite(p2))):
            raise ValueError("correspondences contain non-finite entries")
        object.__setattr__(self, "points3", p3)
        object.__setattr__(self, "points2", p2)

    def __len__(self):
        return self.points3.shape[0]


@dataclass(frozen=True, eq=False)
class AlignmentResult:
    """Rigid transform mapping a source set onto a target set."""

    rotation: np.ndarray
    translation: np.ndarray
    rmse: float  # mm, RMS residual after alignment

    def apply(self, points):
        return np.asarray(points, float) @ self.rotation.T + self.translation


@dataclass(frozen=True, eq=False)
class RefineResult:
    """Outcome of iterative pose refinement.

    ``converged`` is False when the iteration cap was reached or the cost
    plateaued before the step-norm tolerance was met; the pose is then the
    best found so far, never silently discarded.
    """

    pose: CameraPose
    converged: bool
    iterations: int
    costs: tuple  # accepted-cost sequence, non-increasing

    @property
    def cost(self):
        return self.costs[-1]


# ---------------------------------------------------------------------------
# rigid Procrustes (Kabsch) alignment


def _kabsch(source, target):
    """Rotation/translation of the least-squares rigid map source->target.

    Assumes shapes already checked. Reflections are excluded by flipping
    the sign of the smallest singular value when needed.
    """
    sc = source.mean(axis=0)
    tc = target.mean(axis=0)
    H = (source - sc).T @ (target - tc)
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    D = np.diag([1.0, 1.0, d])
    R = Vt.T @ D @ U.T
    t = tc - R @ sc
    return R, t


def procrustes_rigid(source, target) -> AlignmentResult:
    """Least-squares rigid alignment (no scale) of source onto target."""
    src = np.asarray(source, dtype=float)
    tgt = np.asarray(target, dtype=float)
    if src.shape != tgt.shape or src.ndim != 2 or src.shape[1] != 3:
        raise ValueError("source and target must both be (n, 3)")
    n = src.shape[0]
    if n < 3:
        raise ValueError("need at least 3 points, got %d" % n)
    s_src = np.linalg.svd(src - src.mean(axis=0), compute_uv=False)
    if s_src[1] <= 1e-9 * max(s_src[0], 1.0):
        raise DegenerateConfiguration(
            "collinear source set: rotation about the line is unobservable")
    R, t = _kabsch(src, tgt)
    resid = src @ R.T + t - tgt
    rmse = float(np.sqrt(np.mean(np.sum(resid * resid, axis=1))))
    return AlignmentResult(rotation=R, translation=t, rmse=rmse)


# ---------------------------------------------------------------------------
# two-view linear (DLT) triangulation


def _normalized_camera(cam: ProjectiveCamera):
    """[R|t] matrix and the intrinsic normalization of pixel coords."""
    return cam.pose.matrix()


def _normalize_pixels(k: CameraIntrinsics, px):
    px = np.asarray(px, dtype=float)
    y = (px[..., 1] - k.cy) / k.fy
    x = (px[..., 0] - k.cx - k.skew * y) / k.fx
    return np.stack([x, y], axis=-1)


def triangulate_linear(cam_a: ProjectiveCamera, cam_b: ProjectiveCamera,
                       px_a, px_b) -> np.ndarray:
    """Triangulate one point from a two-view pixel correspondence.

    Pixel coordinates are pre-conditioned by the inverse intrinsics before
    building the 4x4 homogeneous system.
    """
    xa = _normalize_pixels(cam_a.intrinsics, np.asarray(px_a, float).reshape(1, 2))
    xb = _normalize_pixels(cam_b.intrinsics, np.asarray(px_b, float).reshape(1, 2))
    if not (np.all(np.isfinite(xa)) and np.all(np.isfinite(xb))):
        raise ValueError("pixel coordinates must be finite")
    X, s = kernels.triangulate_batch(
        _normalized_camera(cam_a), _normalized_camera(cam_b),
        np.ascontiguousarray(xa), np.ascontiguousarray(xb))
    X, s = X[0], s[0]
    if s[2] <= 1e-12 * s[0] or s[3] / s[2] > 1.0 - 1e-9:
        raise IllConditioned(
            "triangulation system has an ambiguous null space "
            "(near-parallel rays)")
    if abs(X[3]) < 1e-12:
        raise AtInfinity("homogeneous solution lies at infinity")
    p = X[:3] / X[3]
    depth_a = cam_a.pose.rotation[2] @ p + cam_a.pose.translation[2]
    if depth_a <= 0:
        raise AtInfinity("no solution with positive depth in the first view")
    return p


def triangulate_batch(cam_a: ProjectiveCamera, cam_b: ProjectiveCamera,
                      px_a, px_b):
    """Vectorized two-view DLT over many correspondences.

    Returns (points (n,3), ok (n,) bool); rows failing the conditioning,
    finiteness or positive-depth checks are flagged instead of raising.
    """
    xa = _normalize_pixels(cam_a.intrinsics, np.asarray(px_a, float))
    xb = _normalize_pixels(cam_b.intrinsics, np.asarray(px_b, float))
    X, s = kernels.triangulate_batch(
        _normalized_camera(cam_a), _normalized_camera(cam_b),
        np.ascontiguousarray(xa), np.ascontiguousarray(xb))
    ok = (s[:, 2] > 1e-12 * s[:, 0]) & (s[:, 3] < (1.0 - 1e-9) * s[:, 2])
    w = X[:, 3]
    ok &= np.abs(w) >= 1e-12
    wsafe = np.where(w == 0, 1.0, w)
    pts = X[:, :3] / wsafe[:, None]
    depth_a = pts @ cam_a.pose.rotation[2] + cam_a.pose.translation[2]
    ok &= depth_a > 0
    return pts, ok


# ---------------------------------------------------------------------------
# pose refinement (damped Gauss-Newton on reprojection error)


def _rodrigues(w):
    theta = np.linalg.norm(w)
    if theta < 1e-14:
        W = np.array([[0, -w[2], w[1]], [w[2], 0, -w[0]], [-w[1], w[0], 0]])
        return np.eye(3) + W
    k = w / theta
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(theta) * K + (1 - np.cos(theta)) * (K @ K)


def _orthonormalize(R):
    U, _, Vt = np.linalg.svd(R)
    Rn = U @ Vt
    if np.linalg.det(Rn) < 0:
        Rn = U @ np.diag([1.0, 1.0, -1.0]) @ Vt
    return Rn


def _reproj_cost(R, t, k: CameraIntrinsics, pts3, obs):
    q = pts3 @ R.T + t
    if np.any(q[:, 2] <= 1e-9):
        return np.inf
    u = (k.fx * q[:, 0] + k.skew * q[:, 1]) / q[:, 2] + k.cx
    v = k.fy * q[:, 1] / q[:, 2] + k.cy
    du = u - obs[:, 0]
    dv = v - obs[:, 1]
    return float(np.sum(du * du + dv * dv))


def refine_pose(initial: CameraPose, corr: Correspondences,
                intrinsics: CameraIntrinsics,
                tol: float = 1e-10, max_iter: int = 100) -> RefineResult:
    """Levenberg-damped Gauss-Newton descent on summed squared pixel error.

    Terminates when the step norm drops below ``tol`` or after ``max_iter``
    accepted iterations. The accepted-cost sequence is non-increasing.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    k = intrinsics
    pts3, obs = corr.points3, corr.points2
    R = np.array(initial.rotation)
    t = np.array(initial.translation)
    cost = _reproj_cost(R, t, k, pts3, obs)
    costs = [cost]
    lam = 1e-6
    converged = False
    it = 0
    while it < max_iter:
        r, J = kernels.reproj_system(R, t, k.fx, k.fy, k.cx, k.cy, k.skew,
                                     np.ascontiguousarray(pts3),
                                     np.ascontiguousarray(obs))
        JtJ = J.T @ J
        g = J.T @ r
        accepted = False
        while lam < 1e14:
            try:
                delta = np.linalg.solve(JtJ + lam * np.eye(6), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            step = float(np.linalg.norm(delta))
            if step < tol:
                converged = True
                break
            Rn = _orthonormalize(_rodrigues(delta[:3]) @ R)
            tn = t + delta[3:]
            cn = _reproj_cost(Rn, tn, k, pts3, obs)
            if cn <= cost:
                R, t, cost = Rn, tn, cn
                costs.append(cost)
                accepted = True
                lam = max(lam / 3.0, 1e-12)
                if step < tol:
                    converged = True
                break
            lam *= 10.0
        if converged or not accepted:
            break
        it += 1
    else:
        # hit the iteration cap without meeting tol
        converged = False
    return RefineResult(pose=CameraPose(_orthonormalize(R), t),
                        converged=converged, iterations=it,
                        costs=tuple(costs))


# ---------------------------------------------------------------------------
# EPnP


def _epnp_control_points(pts3):
    n = pts3.shape[0]
    centroid = pts3.mean(axis=0)
    centered = pts3 - centroid
    s = np.linalg.svd(centered, compute_uv=False)
    _, _, Vt = np.linalg.svd(centered, full_matrices=False)
    if s[1] <= 1e-9 * max(s[0], 1.0):
        raise DegenerateConfiguration("all landmarks are collinear")
    planar = s[2] <= 1e-7 * s[0]
    scales = s / np.sqrt(n)
    if planar:
        ctrl = np.vstack([centroid,
                          centroid + scales[0] * Vt[0],
                          centroid + scales[1] * Vt[1]])
    else:
        ctrl = np.vstack([centroid,
                          centroid + scales[0] * Vt[0],
                          centroid + scales[1] * Vt[1],
                          centroid + scales[2] * Vt[2]])
    return ctrl


def _barycentric(pts3, ctrl):
    m = ctrl.shape[0]
    A = np.vstack([ctrl.T, np.ones(m)])  # 4 x m
    B = np.vstack([pts3.T, np.ones(pts3.shape[0])])  # 4 x n
    alphas, *_ = np.linalg.lstsq(A, B, rcond=None)
    return alphas.T  # (n, m)


def _epnp_kernel(alphas, pts2, k: CameraIntrinsics, m):
    n = alphas.shape[0]
    M = np.zeros((2 * n, 3 * m))
    u = pts2[:, 0]
    v = pts2[:, 1]
    for j in range(m):
        a = alphas[:, j]
        M[0::2, 3 * j] = a * k.fx
        M[0::2, 3 * j + 1] = a * k.skew
        M[0::2, 3 * j + 2] = a * (k.cx - u)
        M[1::2, 3 * j + 1] = a * k.fy
        M[1::2, 3 * j + 2] = a * (k.cy - v)
    _, vecs = np.linalg.eigh(M.T @ M)
    return vecs[:, :4]  # columns ordered by ascending eigenvalue


def _beta_candidates(kernel, ctrl_w, m):
    pairs = list(combinations(range(m), 2))
    rho = np.array([np.sum((ctrl_w[i] - ctrl_w[j]) ** 2) for i, j in pairs])
    vs = [kernel[:, i].reshape(m, 3) for i in range(4)]
    dv = np.array([[vs[kk][i] - vs[kk][j] for i, j in pairs] for kk in range(4)])
    # dv[k, p] = difference of control points of kernel vector k on pair p

    cands = []

    # N = 1: single kernel vector, scale from distance ratios
    d1 = np.sqrt(np.sum(dv[0] ** 2, axis=1))
    beta1 = float(np.sum(d1 * np.sqrt(rho)) / np.sum(d1 * d1))
    cands.append(np.array([beta1, 0.0, 0.0, 0.0]))

    npairs = len(pairs)

    # N = 2: unknowns (b11, b12, b22)
    L2 = np.empty((npairs, 3))
    L2[:, 0] = np.sum(dv[0] * dv[0], axis=1)
    L2[:, 1] = 2 * np.sum(dv[0] * dv[1], axis=1)
    L2[:, 2] = np.sum(dv[1] * dv[1], axis=1)
    b, *_ = np.linalg.lstsq(L2, rho, rcond=None)
    if b[0] < 0:
        b = -b
    b1 = np.sqrt(max(b[0], 0.0))
    b2 = np.sign(b[1]) * np.sqrt(abs(b[2]))
    cands.append(np.array([b1, b2, 0.0, 0.0]))

    # N = 3: unknowns (b11, b12, b22, b13, b23, b33); only determined when
    # there are enough distance constraints (non-planar case)
    if npairs >= 6:
        L3 = np.empty((npairs, 6))
        L3[:, 0] = np.sum(dv[0] * dv[0], axis=1)
        L3[:, 1] = 2 * np.sum(dv[0] * dv[1], axis=1)
        L3[:, 2] = np.sum(dv[1] * dv[1], axis=1)
        L3[:, 3] = 2 * np.sum(dv[0] * dv[2], axis=1)
        L3[:, 4] = 2 * np.sum(dv[1] * dv[2], axis=1)
        L3[:, 5] = np.sum(dv[2] * dv[2], axis=1)
        b, *_ = np.linalg.lstsq(L3, rho, rcond=None)
        if b[0] < 0:
            b = -b
        b1 = np.sqrt(max(b[0], 0.0))
        b2 = np.sign(b[1]) * np.sqrt(abs(b[2]))
        b3 = np.sign(b[3]) * np.sqrt(abs(b[5]))
        cands.append(np.array([b1, b2, b3, 0.0]))

    # Gauss-Newton polish of each candidate on the distance constraints
    refined = []
    for beta in cands:
        beta = beta.copy()
        for _ in range(10):
            sdv = np.tensordot(beta, dv, axes=(0, 0))  # (npairs, 3)
            f = np.sum(sdv * sdv, axis=1) - rho
            Jb = 2 * np.einsum("pd,kpd->pk", sdv, dv)
            try:
                step, *_ = np.linalg.lstsq(Jb, -f, rcond=None)
            except np.linalg.LinAlgError:
                break
            beta = beta + step
            if np.linalg.norm(step) < 1e-12 * (1 + np.linalg.norm(beta)):
                break
        refined.append(beta)
    return refined


def _pose_from_betas(beta, kernel, alphas, pts3, m):
    x = kernel @ beta  # (3m,)
    ctrl_cam = x.reshape(m, 3)
    pts_cam = alphas @ ctrl_cam
    if pts_cam[:, 2].mean() < 0:
        pts_cam = -pts_cam
    R, t = _kabsch(pts3, pts_cam)
    return R, t


def solve_pnp(corr: Correspondences, intrinsics: CameraIntrinsics,
              tol: float = 1e-10, max_iter: int = 100) -> RefineResult:
    """EPnP initialization followed by Gauss-Newton reprojection refinement.

    Returns the refined pose estimate; ``converged`` is False only when the
    refinement stopped at its iteration cap or on a cost plateau.
    """
    n = len(corr)
    if n < 4:
        raise ValueError("PnP needs at least 4 correspondences, got %d" % n)
    pts3, pts2 = corr.points3, corr.points2
    k = intrinsics

    ctrl_w = _epnp_control_points(pts3)
    m = ctrl_w.shape[0]
    alphas = _barycentric(pts3, ctrl_w)
    kernel = _epnp_kernel(alphas, pts2, k, m)

    best = None
    best_cost = np.inf
    for beta in _beta_candidates(kernel, ctrl_w, m):
        R, t = _pose_from_betas(beta, kernel, alphas, pts3, m)
        c = _reproj_cost(R, t, k, pts3, pts2)
        if c < best_cost:
            best_cost = c
            best = (R, t)
    if best is None or not np.isfinite(best_cost):
        raise DegenerateConfiguration("EPnP produced no physical pose")

    init = CameraPose(_orthonormalize(best[0]), best[1])
    return refine_pose(init, corr, intrinsics, tol=tol, max_iter=max_iter)
