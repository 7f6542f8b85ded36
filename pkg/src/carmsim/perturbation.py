"""Intrinsic perturbation model and sweep grid.

Two modes:

* ``uniform-scaled`` — each parameter gets independent noise drawn from
  U[-1, 1] times its level; fx and fy share one focal draw.
* ``signed-level`` — the focal shift is applied verbatim (the sweep grid
  enumerates both signs explicitly, so the level carries its own sign);
  the principal point offset is still drawn per axis from U[-1, 1] times
  `pp_level`, matching the noise model of the sweep figures.

The AP and LAT views are always perturbed independently: call once per view
with that view's RNG substream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidPerturbation
from .geometry import CameraIntrinsics

MODES = ("signed-level", "uniform-scaled")

# 14 signed levels: -700..-100 and 100..700 in steps of 100
DEFAULT_FOCAL_LEVELS = tuple(
    float(v) for v in range(-700, 800, 100) if v != 0)
DEFAULT_PP_LEVELS = (20.0, 50.0, 100.0, 200.0)


@dataclass(frozen=True)
class PerturbationSpec:
    focal_levels: tuple = DEFAULT_FOCAL_LEVELS
    pp_levels: tuple = DEFAULT_PP_LEVELS
    mode: str = "signed-level"
    trials_per_cell: int = 100

    def __post_init__(self):
        object.__setattr__(self, "focal_levels",
                           tuple(float(v) for v in self.focal_levels))
        object.__setattr__(self, "pp_levels",
                           tuple(float(v) for v in self.pp_levels))
        if self.mode not in MODES:
            raise ValueError("mode must be one of %s" % (MODES,))
        if any(v < 0 for v in self.pp_levels):
            raise ValueError("pp levels are magnitudes and must be >= 0")
        if self.trials_per_cell < 1:
            raise ValueError("trials_per_cell must be >= 1")


def perturb_intrinsics(truth: CameraIntrinsics, focal_level: float,
                       pp_level: float, mode: str,
                       rng: np.random.Generator) -> CameraIntrinsics:
    """One perturbed copy of `truth`. Draw order is fixed (focal first,
    then principal point) so substream consumption is reproducible."""
    if mode not in MODES:
        raise ValueError("mode must be one of %s" % (MODES,))
    if pp_level < 0:
        raise ValueError("pp_level is a magnitude and must be >= 0")

    if mode == "uniform-scaled":
        df = abs(focal_level) * rng.uniform(-1.0, 1.0)
    else:  # signed-level
        df = float(focal_level)
    dcx = pp_level * rng.uniform(-1.0, 1.0)
    dcy = pp_level * rng.uniform(-1.0, 1.0)

    fx = truth.fx + df
    fy = truth.fy + df
    if fx <= 0 or fy <= 0:
        raise InvalidPerturbation(
            "focal shift %g px drives the focal length non-positive" % df)
    return CameraIntrinsics(fx=fx, fy=fy, cx=truth.cx + dcx,
                            cy=truth.cy + dcy, skew=truth.skew)


def grid(spec: PerturbationSpec):
    """All (focal_level, pp_level) sweep cells, pp outer and focal inner."""
    return [(f, p) for p in spec.pp_levels for f in spec.focal_levels]


def focal_shift_mm(delta_px: float, pixel_spacing: float) -> float:
    """Detector-scale mm equivalent of a focal shift in pixels."""
    return delta_px * pixel_spacing
