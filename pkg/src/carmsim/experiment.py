"""Monte Carlo harness: per-trial pipeline and cell-level aggregation.

Per trial: project the landmarks and evaluation points through the TRUE
cameras, re-estimate each view's pose by PnP under the PERTURBED intrinsics,
triangulate the evaluation points with the perturbed/re-estimated cameras,
rigidly align the reconstruction to ground truth and score 3D RMSE plus
per-view mean reprojection error.

RNG substreams are keyed by (master seed, stream tag, cell index, trial
index) through numpy's SeedSequence, so results are bit-identical regardless
of worker count or scheduling order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from . import perturbation
from .errors import CarmSimError, ConfigError
from .geometry import BiplanarRig, CameraIntrinsics, ProjectiveCamera, project_many
from .perturbation import perturb_intrinsics
from .solvers import (Correspondences, procrustes_rigid, solve_pnp,
                      triangulate_batch)

# stream tags for substream derivation
_STREAM_POINTS = 0
_STREAM_TRIALS = 1
_STREAM_LANDMARKS = 2


@dataclass(frozen=True, eq=False)
class TrialResult:
    recon_rmse: float  # mm
    reproj_ap: float  # px, mean over evaluation points
    reproj_lat: float  # px
    focal_delta_ap: float  # px
    focal_delta_lat: float  # px
    pp_delta_ap: tuple  # (dx, dy) px
    pp_delta_lat: tuple
    converged_ap: bool = True
    converged_lat: bool = True
    failed: bool = False
    failure_reason: str = ""


@dataclass(frozen=True, eq=False)
class CellStats:
    focal_level: float
    pp_level: float
    n_trials: int
    n_failed: int
    recon_rmse_mean: float
    recon_rmse_std: float
    reproj_ap_mean: float
    reproj_ap_std: float
    reproj_lat_mean: float
    reproj_lat_std: float


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    cells: tuple  # of CellStats, grid order (pp outer, focal inner)
    seed: int
    config_digest: str
    trials_per_cell: int
    partial_results: bool  # True when any cell lost > 10% of its trials
    # population standard deviation (ddof=0) over non-failed trials
    std_estimator: str = "population (ddof=0)"


def reprojection_error(camera: ProjectiveCamera, points3, observed2) -> float:
    """Mean Euclidean pixel distance between observations and reprojections."""
    pts = np.asarray(points3, float).reshape(-1, 3)
    obs = np.asarray(observed2, float).reshape(-1, 2)
    if pts.shape[0] != obs.shape[0] or pts.shape[0] < 1:
        raise ValueError("need equal, non-empty point lists")
    px, depths = project_many(camera, pts)
    if np.any(depths <= 1e-9):
        from .errors import BehindCamera
        raise BehindCamera("a point fails to project (non-positive depth)")
    return float(np.mean(np.linalg.norm(px - obs, axis=1)))


def recon_error_rmse(reconstructed, ground_truth) -> float:
    """RMS point distance after rigid (Procrustes) alignment, mm."""
    rec = np.asarray(reconstructed, float).reshape(-1, 3)
    gt = np.asarray(ground_truth, float).reshape(-1, 3)
    if rec.shape != gt.shape or rec.shape[0] < 3:
        raise ValueError("need equal point lists of length >= 3")
    return procrustes_rigid(rec, gt).rmse


def run_trial(rig_true: BiplanarRig, perturbed_ap: CameraIntrinsics,
              perturbed_lat: CameraIntrinsics, landmarks, eval_points,
              pixel_noise_sigma: float = 0.0,
              rng: np.random.Generator = None) -> TrialResult:
    """Execute one perturb/solve/triangulate/align/score trial.

    Solver failures mark the trial failed instead of raising, so one bad
    trial never aborts its cell.
    """
    landmarks = np.asarray(landmarks, float).reshape(-1, 3)
    eval_points = np.asarray(eval_points, float).reshape(-1, 3)
    same_sets = (landmarks.shape == eval_points.shape
                 and np.array_equal(landmarks, eval_points))

    k_true_ap = rig_true.ap.intrinsics
    k_true_lat = rig_true.lat.intrinsics
    deltas = dict(
        focal_delta_ap=perturbed_ap.fx - k_true_ap.fx,
        focal_delta_lat=perturbed_lat.fx - k_true_lat.fx,
        pp_delta_ap=(perturbed_ap.cx - k_true_ap.cx,
                     perturbed_ap.cy - k_true_ap.cy),
        pp_delta_lat=(perturbed_lat.cx - k_true_lat.cx,
                      perturbed_lat.cy - k_true_lat.cy),
    )

    def failed(reason):
        return TrialResult(recon_rmse=0.0, reproj_ap=0.0, reproj_lat=0.0,
                           failed=True, failure_reason=reason, **deltas)

    try:
        obs_land_ap, z1 = project_many(rig_true.ap, landmarks)
        obs_land_lat, z2 = project_many(rig_true.lat, landmarks)
        if same_sets:
            obs_eval_ap, obs_eval_lat = obs_land_ap, obs_land_lat
            z3 = z1
            z4 = z2
        else:
            obs_eval_ap, z3 = project_many(rig_true.ap, eval_points)
            obs_eval_lat, z4 = project_many(rig_true.lat, eval_points)
        if min(z1.min(), z2.min(), z3.min(), z4.min()) <= 0:
            return failed("a point lies behind a true camera")
        if pixel_noise_sigma > 0:
            if rng is None:
                raise ValueError("pixel noise requires an rng")
            obs_land_ap = obs_land_ap + rng.normal(0, pixel_noise_sigma,
                                                   obs_land_ap.shape)
            obs_land_lat = obs_land_lat + rng.normal(0, pixel_noise_sigma,
                                                     obs_land_lat.shape)
            if same_sets:
                obs_eval_ap, obs_eval_lat = obs_land_ap, obs_land_lat
            else:
                obs_eval_ap = obs_eval_ap + rng.normal(
                    0, pixel_noise_sigma, obs_eval_ap.shape)
                obs_eval_lat = obs_eval_lat + rng.normal(
                    0, pixel_noise_sigma, obs_eval_lat.shape)

        est_ap = solve_pnp(Correspondences(landmarks, obs_land_ap),
                           perturbed_ap)
        est_lat = solve_pnp(Correspondences(landmarks, obs_land_lat),
                            perturbed_lat)
        cam_ap = ProjectiveCamera(perturbed_ap, est_ap.pose)
        cam_lat = ProjectiveCamera(perturbed_lat, est_lat.pose)

        recon, ok = triangulate_batch(cam_ap, cam_lat,
                                      obs_eval_ap, obs_eval_lat)
        if not np.all(ok):
            return failed("triangulation failed for %d points"
                          % int(np.sum(~ok)))

        rmse = recon_error_rmse(recon, eval_points)
        rp_ap = reprojection_error(cam_ap, recon, obs_eval_ap)
        rp_lat = reprojection_error(cam_lat, recon, obs_eval_lat)
        return TrialResult(recon_rmse=rmse, reproj_ap=rp_ap,
                           reproj_lat=rp_lat,
                           converged_ap=est_ap.converged,
                           converged_lat=est_lat.converged, **deltas)
    except CarmSimError as exc:
        return failed("%s: %s" % (type(exc).__name__, exc))


def _trial_rng(master_seed, cell_index, trial_index):
    ss = np.random.SeedSequence(
        [int(master_seed), _STREAM_TRIALS, int(cell_index), int(trial_index)])
    return np.random.default_rng(ss)


def points_rng(master_seed):
    """Substream used for sampling the evaluation volume."""
    return np.random.default_rng(
        np.random.SeedSequence([int(master_seed), _STREAM_POINTS]))


def run_cell_trial(rig, spec_mode, focal_level, pp_level, landmarks,
                   eval_points, master_seed, cell_index, trial_index,
                   pixel_noise_sigma=0.0) -> TrialResult:
    """One seeded trial of one sweep cell (the parallel work unit)."""
    rng = _trial_rng(master_seed, cell_index, trial_index)
    k_ap = perturb_intrinsics(rig.ap.intrinsics, focal_level, pp_level,
                              spec_mode, rng)
    k_lat = perturb_intrinsics(rig.lat.intrinsics, focal_level, pp_level,
                               spec_mode, rng)
    return run_trial(rig, k_ap, k_lat, landmarks, eval_points,
                     pixel_noise_sigma=pixel_noise_sigma, rng=rng)


def aggregate_cell(focal_level, pp_level, trials) -> CellStats:
    """Mean/std (population, ddof=0) over non-failed trials of a cell."""
    ok = [t for t in trials if not t.failed]
    n_failed = len(trials) - len(ok)

    def stats(vals):
        if not vals:
            return float("nan"), float("nan")
        a = np.array(vals)
        return float(a.mean()), float(a.std(ddof=0))

    rm, rs = stats([t.recon_rmse for t in ok])
    am, as_ = stats([t.reproj_ap for t in ok])
    lm, ls = stats([t.reproj_lat for t in ok])
    return CellStats(focal_level=focal_level, pp_level=pp_level,
                     n_trials=len(trials), n_failed=n_failed,
                     recon_rmse_mean=rm, recon_rmse_std=rs,
                     reproj_ap_mean=am, reproj_ap_std=as_,
                     reproj_lat_mean=lm, reproj_lat_std=ls)


def run_experiment(config) -> ExperimentReport:
    """Run the full sweep described by an ExperimentConfig.

    Deterministic for a fixed master seed, independent of the worker count:
    every (cell, trial) owns its own RNG substream and results are merged
    in task order.
    """
    from .config import ExperimentConfig, config_digest  # cycle-free import
    if not isinstance(config, ExperimentConfig):
        raise ConfigError("run_experiment expects an ExperimentConfig")

    from .geometry import build_default_rig
    from .sampling import filter_points, phantom_points, sample_volume

    rig = build_default_rig(config.rig)
    if config.points_mode == "phantom":
        eval_points = phantom_points(config.phantom, rig, config.filters)
    else:
        raw = sample_volume(config.volume, config.n_samples,
                            points_rng(config.seed))
        eval_points = filter_points(raw, rig, config.filters)
    if eval_points.shape[0] < 4:
        raise ConfigError(
            "only %d usable points after filtering; need >= 4"
            % eval_points.shape[0])

    if config.landmark_mode == "disjoint" and config.points_mode == "volume":
        lm_rng = np.random.default_rng(
            np.random.SeedSequence([int(config.seed), _STREAM_LANDMARKS]))
        raw_lm = sample_volume(config.volume, config.n_samples, lm_rng)
        landmarks = filter_points(raw_lm, rig, config.filters)
        if landmarks.shape[0] < 4:
            raise ConfigError("disjoint landmark set too small after filtering")
    else:
        landmarks = eval_points  # literal reading: one shared set

    spec = config.perturbation
    cells = perturbation.grid(spec)
    tasks = [(ci, ti, f, p)
             for ci, (f, p) in enumerate(cells)
             for ti in range(spec.trials_per_cell)]

    runner = Parallel(n_jobs=config.workers, prefer="processes") \
        if config.workers != 1 else None
    if runner is None:
        results = [run_cell_trial(rig, spec.mode, f, p, landmarks,
                                  eval_points, config.seed, ci, ti,
                                  config.pixel_noise_sigma)
                   for ci, ti, f, p in tasks]
    else:
        results = runner(
            delayed(run_cell_trial)(rig, spec.mode, f, p, landmarks,
                                    eval_points, config.seed, ci, ti,
                                    config.pixel_noise_sigma)
            for ci, ti, f, p in tasks)

    n_t = spec.trials_per_cell
    stats = []
    partial = False
    for ci, (f, p) in enumerate(cells):
        trials = results[ci * n_t:(ci + 1) * n_t]
        cs = aggregate_cell(f, p, trials)
        if cs.n_failed > 0.1 * cs.n_trials:
            partial = True
        stats.append(cs)

    return ExperimentReport(cells=tuple(stats), seed=config.seed,
                            config_digest=config_digest(config),
                            trials_per_cell=n_t, partial_results=partial)
