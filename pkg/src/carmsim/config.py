"""Experiment configuration: strict JSON schema with full validation.

Every violation is collected and reported at once; unknown keys are errors
so a typo can never silently fall back to a default.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources

from .errors import ConfigError, ParseError
from .geometry import RigConfig
from .perturbation import MODES, PerturbationSpec
from .sampling import FilterSpec, PhantomLayout, VolumeSpec

SCHEMA_VERSION = 1

BUNDLED_CONFIGS = ("sim_default", "phantom_default")


@dataclass(frozen=True)
class ExperimentConfig:
    rig: RigConfig
    volume: VolumeSpec
    filters: FilterSpec
    perturbation: PerturbationSpec
    phantom: PhantomLayout
    seed: int
    points_mode: str = "volume"  # "volume" | "phantom"
    n_samples: int = 500
    landmark_mode: str = "shared"  # "shared" | "disjoint"
    pixel_noise_sigma: float = 0.0
    workers: int = 1
    output_csv: str = "report.csv"
    output_json: str = "report.json"


def _check_keys(d, allowed, path, errors):
    for key in d:
        if key not in allowed:
            errors.append("%s: unknown key '%s'" % (path or "<root>", key))


def _num(d, key, path, errors, default=None, required=False, minimum=None,
         exclusive=False, integer=False):
    if key not in d:
        if required:
            errors.append("%s.%s: missing" % (path, key))
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        errors.append("%s.%s: expected a number, got %r" % (path, key, v))
        return default
    if integer and not float(v).is_integer():
        errors.append("%s.%s: expected an integer, got %r" % (path, key, v))
        return default
    if minimum is not None:
        if (exclusive and v <= minimum) or (not exclusive and v < minimum):
            op = ">" if exclusive else ">="
            errors.append("%s.%s: must be %s %g, got %r" % (path, key, op,
                                                            minimum, v))
            return default
    return int(v) if integer else float(v)


def _vec3(d, key, path, errors, default):
    if key not in d:
        return default
    v = d[key]
    if (not isinstance(v, list) or len(v) != 3
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool)
                       for x in v)):
        errors.append("%s.%s: expected a list of 3 numbers" % (path, key))
        return default
    return tuple(float(x) for x in v)


def _choice(d, key, path, errors, choices, default):
    if key not in d:
        return default
    v = d[key]
    if v not in choices:
        errors.append("%s.%s: expected one of %s, got %r"
                      % (path, key, list(choices), v))
        return default
    return v


def _levels(d, key, path, errors, default, magnitudes=False):
    if key not in d:
        return default
    v = d[key]
    if not isinstance(v, list) or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool)
            for x in v):
        errors.append("%s.%s: expected a list of numbers" % (path, key))
        return default
    if magnitudes and any(x < 0 for x in v):
        errors.append("%s.%s: magnitudes must be >= 0" % (path, key))
        return default
    return tuple(float(x) for x in v)


def parse_config(doc: dict) -> ExperimentConfig:
    """Validate a parsed JSON document into an ExperimentConfig.

    Raises ConfigError carrying every violation found.
    """
    errors = []
    if not isinstance(doc, dict):
        raise ConfigError(["<root>: expected a JSON object"])

    top_allowed = {"schema_version", "seed", "rig", "volume", "filters",
                   "perturbation", "phantom", "points", "landmarks", "noise",
                   "output", "workers"}
    _check_keys(doc, top_allowed, "", errors)

    sv = doc.get("schema_version", SCHEMA_VERSION)
    if sv != SCHEMA_VERSION:
        errors.append("schema_version: expected %d, got %r"
                      % (SCHEMA_VERSION, sv))

    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not (
            0 <= seed < 2 ** 64):
        errors.append("seed: expected an unsigned 64-bit integer, got %r"
                      % (seed,))
        seed = 0

    def section(name):
        s = doc.get(name, {})
        if not isinstance(s, dict):
            errors.append("%s: expected an object" % name)
            return {}
        return s

    r = section("rig")
    _check_keys(r, {"fx_ap", "fx_lat", "image_width", "image_height",
                    "pixel_spacing", "source_distance_ap",
                    "source_distance_lat", "view_angle_deg"}, "rig", errors)
    rig = RigConfig(
        fx_ap=_num(r, "fx_ap", "rig", errors, 4500.0, minimum=0,
                   exclusive=True),
        fx_lat=_num(r, "fx_lat", "rig", errors, 4550.0, minimum=0,
                    exclusive=True),
        image_width=_num(r, "image_width", "rig", errors, 1024, minimum=1,
                         integer=True),
        image_height=_num(r, "image_height", "rig", errors, 1024, minimum=1,
                          integer=True),
        pixel_spacing=_num(r, "pixel_spacing", "rig", errors, 0.21,
                           minimum=0, exclusive=True),
        source_distance_ap=_num(r, "source_distance_ap", "rig", errors,
                                400.0, minimum=0, exclusive=True),
        source_distance_lat=_num(r, "source_distance_lat", "rig", errors,
                                 370.0, minimum=0, exclusive=True),
        view_angle_deg=_num(r, "view_angle_deg", "rig", errors, 90.0),
    )
    if not 10.0 < rig.view_angle_deg < 170.0:
        errors.append("rig.view_angle_deg: must be in (10, 170), got %g"
                      % rig.view_angle_deg)

    v = section("volume")
    _check_keys(v, {"center_mm", "half_extent_mm"}, "volume", errors)
    center = _vec3(v, "center_mm", "volume", errors, (0.0, 0.0, 0.0))
    half = _vec3(v, "half_extent_mm", "volume", errors, (75.0, 75.0, 75.0))
    if any(x <= 0 for x in half):
        errors.append("volume.half_extent_mm: entries must be > 0")
        half = (75.0, 75.0, 75.0)
    volume = VolumeSpec(center=center, half_extent=half)

    f = section("filters")
    _check_keys(f, {"edge_margin_px", "min_disparity_px"}, "filters", errors)
    filters = FilterSpec(
        edge_margin=_num(f, "edge_margin_px", "filters", errors, 40.0,
                         minimum=0),
        min_disparity=_num(f, "min_disparity_px", "filters", errors, 40.0,
                           minimum=0),
    )

    p = section("perturbation")
    _check_keys(p, {"mode", "focal_levels_px", "pp_levels_px",
                    "trials_per_cell"}, "perturbation", errors)
    mode = _choice(p, "mode", "perturbation", errors, MODES, "signed-level")
    focal_levels = _levels(p, "focal_levels_px", "perturbation", errors,
                           PerturbationSpec().focal_levels)
    pp_levels = _levels(p, "pp_levels_px", "perturbation", errors,
                        PerturbationSpec().pp_levels, magnitudes=True)
    trials = _num(p, "trials_per_cell", "perturbation", errors, 100,
                  minimum=1, integer=True)
    pert = PerturbationSpec(focal_levels=focal_levels, pp_levels=pp_levels,
                            mode=mode, trials_per_cell=trials)

    ph = section("phantom")
    _check_keys(ph, {"rows", "cols", "pitch_mm", "plane_separation_mm",
                     "center_mm"}, "phantom", errors)
    phantom = PhantomLayout(
        rows=_num(ph, "rows", "phantom", errors, 4, minimum=1, integer=True),
        cols=_num(ph, "cols", "phantom", errors, 4, minimum=1, integer=True),
        pitch=_num(ph, "pitch_mm", "phantom", errors, 40.0, minimum=0,
                   exclusive=True),
        plane_separation=_num(ph, "plane_separation_mm", "phantom", errors,
                              60.0, minimum=0, exclusive=True),
        center=_vec3(ph, "center_mm", "phantom", errors, (0.0, 0.0, 0.0)),
    )

    pt = section("points")
    _check_keys(pt, {"mode", "n_samples"}, "points", errors)
    points_mode = _choice(pt, "mode", "points", errors,
                          ("volume", "phantom"), "volume")
    n_samples = _num(pt, "n_samples", "points", errors, 500, minimum=1,
                     integer=True)

    lm = section("landmarks")
    _check_keys(lm, {"mode"}, "landmarks", errors)
    landmark_mode = _choice(lm, "mode", "landmarks", errors,
                            ("shared", "disjoint"), "shared")

    nz = section("noise")
    _check_keys(nz, {"pixel_sigma_px"}, "noise", errors)
    noise_sigma = _num(nz, "pixel_sigma_px", "noise", errors, 0.0, minimum=0)

    out = section("output")
    _check_keys(out, {"csv", "json"}, "output", errors)
    out_csv = out.get("csv", "report.csv")
    out_json = out.get("json", "report.json")
    for name, val in (("csv", out_csv), ("json", out_json)):
        if not isinstance(val, str) or not val:
            errors.append("output.%s: expected a non-empty string" % name)

    workers = _num(doc, "workers", "", errors, 1, integer=True)
    if workers is not None and workers == 0:
        errors.append("workers: must be nonzero (use -1 for all cores)")
        workers = 1

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(rig=rig, volume=volume, filters=filters,
                            perturbation=pert, phantom=phantom, seed=seed,
                            points_mode=points_mode, n_samples=n_samples,
                            landmark_mode=landmark_mode,
                            pixel_noise_sigma=noise_sigma, workers=workers,
                            output_csv=str(out_csv), output_json=str(out_json))


def resolve_config_path(name_or_path: str):
    """Accept either a filesystem path or the name of a bundled config."""
    import os
    if os.path.exists(name_or_path):
        return name_or_path
    if name_or_path in BUNDLED_CONFIGS:
        ref = resources.files("carmsim") / "configs" / (name_or_path + ".json")
        return str(ref)
    return name_or_path


def load_config(path: str) -> ExperimentConfig:
    """Load and fully validate a config file.

    Raises ParseError for malformed JSON (with line/column) and ConfigError
    listing every schema violation.
    """
    path = resolve_config_path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(["cannot read config %r: %s" % (path, exc)])
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(["%s: line %d column %d: %s"
                          % (path, exc.lineno, exc.colno, exc.msg)])
    return parse_config(doc)


def canonical_json(config: ExperimentConfig) -> str:
    """Fully explicit, key-sorted JSON rendering used for digests."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "seed": config.seed,
        "rig": {
            "fx_ap": config.rig.fx_ap,
            "fx_lat": config.rig.fx_lat,
            "image_width": config.rig.image_width,
            "image_height": config.rig.image_height,
            "pixel_spacing": config.rig.pixel_spacing,
            "source_distance_ap": config.rig.source_distance_ap,
            "source_distance_lat": config.rig.source_distance_lat,
            "view_angle_deg": config.rig.view_angle_deg,
        },
        "volume": {"center_mm": list(config.volume.center),
                   "half_extent_mm": list(config.volume.half_extent)},
        "filters": {"edge_margin_px": config.filters.edge_margin,
                    "min_disparity_px": config.filters.min_disparity},
        "perturbation": {"mode": config.perturbation.mode,
                         "focal_levels_px": list(config.perturbation.focal_levels),
                         "pp_levels_px": list(config.perturbation.pp_levels),
                         "trials_per_cell": config.perturbation.trials_per_cell},
        "phantom": {"rows": config.phantom.rows,
                    "cols": config.phantom.cols,
                    "pitch_mm": config.phantom.pitch,
                    "plane_separation_mm": config.phantom.plane_separation,
                    "center_mm": list(config.phantom.center)},
        "points": {"mode": config.points_mode,
                   "n_samples": config.n_samples},
        "landmarks": {"mode": config.landmark_mode},
        "noise": {"pixel_sigma_px": config.pixel_noise_sigma},
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def config_digest(config: ExperimentConfig) -> str:
    """SHA-256 over the canonical config rendering (output paths and worker
    count excluded: they cannot affect the numbers)."""
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()
