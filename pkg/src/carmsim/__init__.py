"""carmsim: how intrinsic calibration error propagates into biplanar 3D
reconstruction once extrinsics are re-estimated from known landmarks."""

from .errors import (AtInfinity, BehindCamera, CarmSimError, ConfigError,
                     DegenerateConfiguration, IllConditioned,
                     InvalidPerturbation, InvalidRigConfig, IoError,
                     LayoutNotVisible, ParseError)
from .geometry import (BiplanarRig, CameraIntrinsics, CameraPose,
                       ProjectiveCamera, RigConfig, build_default_rig,
                       project, project_many, projection_matrix)
from .perturbation import PerturbationSpec, grid, perturb_intrinsics
from .sampling import (FilterSpec, PhantomLayout, VolumeSpec, filter_points,
                       phantom_points, sample_volume)
from .solvers import (AlignmentResult, Correspondences, RefineResult,
                      procrustes_rigid, refine_pose, solve_pnp,
                      triangulate_linear)
from .experiment import (ExperimentReport, TrialResult, recon_error_rmse,
                         reprojection_error, run_experiment, run_trial)
from .config import ExperimentConfig, load_config
from .report import write_report

__version__ = "0.1.0"
