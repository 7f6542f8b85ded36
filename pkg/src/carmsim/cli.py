"""Command-line interface.

Subcommands:
  simulate <config>                       run the full sweep, write reports
  sample   <config>                       emit the filtered test points as CSV
  trial    <config> --focal F --pp P --seed S   one trial, human-readable
  figure   <report.csv> --pp LEVEL        x/y/err columns for one sweep curve

Exit codes: 0 success, 1 validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import report as report_mod
from .config import load_config
from .errors import CarmSimError, ConfigError
from .experiment import run_trial
from .geometry import build_default_rig
from .perturbation import perturb_intrinsics
from .sampling import filter_points, phantom_points, projection_metrics, \
    sample_volume


def _build_parser():
    p = argparse.ArgumentParser(
        prog="carmsim",
        description="Intrinsic-calibration sensitivity simulator for "
                    "biplanar C-arm reconstruction.")
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the full perturbation sweep")
    sim.add_argument("config", help="config file path or bundled name")
    sim.add_argument("--workers", type=int, default=None,
                     help="override the config worker count")

    smp = sub.add_parser("sample", help="emit the filtered point set as CSV")
    smp.add_argument("config")
    smp.add_argument("--out", default="-", help="output path (default stdout)")

    tr = sub.add_parser("trial", help="run a single trial and print a breakdown")
    tr.add_argument("config")
    tr.add_argument("--focal", type=float, required=True,
                    help="signed focal shift in pixels")
    tr.add_argument("--pp", type=float, required=True,
                    help="principal point offset magnitude in pixels")
    tr.add_argument("--seed", type=int, required=True)

    fig = sub.add_parser("figure",
                         help="extract one curve (x/y/err) from a report CSV")
    fig.add_argument("report")
    fig.add_argument("--pp", type=float, required=True,
                     help="principal point level selecting the curve")
    fig.add_argument("--out", default="-")
    return p


def _emit(text, out):
    if out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _eval_points(config, rig):
    if config.points_mode == "phantom":
        return phantom_points(config.phantom, rig, config.filters)
    from .experiment import points_rng
    raw = sample_volume(config.volume, config.n_samples,
                        points_rng(config.seed))
    return filter_points(raw, rig, config.filters)


def _cmd_simulate(args):
    from .experiment import run_experiment
    config = load_config(args.config)
    if args.workers is not None:
        from dataclasses import replace
        config = replace(config, workers=args.workers)
    t0 = time.time()
    rep = run_experiment(config)
    report_mod.write_report(rep, "csv", config.output_csv)
    report_mod.write_report(rep, "json", config.output_json)
    print("wrote %s and %s (%d cells, %d trials/cell, %.1f s)"
          % (config.output_csv, config.output_json, len(rep.cells),
             rep.trials_per_cell, time.time() - t0))
    if rep.partial_results:
        print("warning: some cells lost more than 10% of their trials",
              file=sys.stderr)
    return 0


def _cmd_sample(args):
    config = load_config(args.config)
    rig = build_default_rig(config.rig)
    pts = _eval_points(config, rig)
    m = projection_metrics(pts, rig)
    lines = ["x_mm,y_mm,z_mm,u_ap_px,v_ap_px,u_lat_px,v_lat_px,"
             "edge_score_px,disparity_px"]
    for i in range(pts.shape[0]):
        lines.append(",".join("%.17g" % v for v in (
            pts[i, 0], pts[i, 1], pts[i, 2],
            m["px_ap"][i, 0], m["px_ap"][i, 1],
            m["px_lat"][i, 0], m["px_lat"][i, 1],
            m["edge_score"][i], m["disparity"][i])))
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_trial(args):
    config = load_config(args.config)
    rig = build_default_rig(config.rig)
    pts = _eval_points(config, rig)
    rng = np.random.default_rng(np.random.SeedSequence([args.seed]))
    k_ap = perturb_intrinsics(rig.ap.intrinsics, args.focal, args.pp,
                              config.perturbation.mode, rng)
    k_lat = perturb_intrinsics(rig.lat.intrinsics, args.focal, args.pp,
                               config.perturbation.mode, rng)
    res = run_trial(rig, k_ap, k_lat, pts, pts,
                    pixel_noise_sigma=config.pixel_noise_sigma, rng=rng)
    print("points:              %d" % pts.shape[0])
    print("focal shift AP/LAT:  %+.6g / %+.6g px"
          % (res.focal_delta_ap, res.focal_delta_lat))
    print("pp offset AP:        (%+.6g, %+.6g) px" % res.pp_delta_ap)
    print("pp offset LAT:       (%+.6g, %+.6g) px" % res.pp_delta_lat)
    if res.failed:
        print("trial FAILED:        %s" % res.failure_reason)
        return 2
    print("recon RMSE:          %.9g mm" % res.recon_rmse)
    print("reproj AP / LAT:     %.9g / %.9g px"
          % (res.reproj_ap, res.reproj_lat))
    print("pose converged:      AP=%s LAT=%s"
          % (res.converged_ap, res.converged_lat))
    return 0


def _cmd_figure(args):
    cells = report_mod.read_report_csv(args.report)
    sel = [c for c in cells if c.pp_level == args.pp]
    if not sel:
        print("no such pp level: %g" % args.pp, file=sys.stderr)
        return 1
    sel.sort(key=lambda c: c.focal_level)
    lines = ["focal_level_px,recon_rmse_mean_mm,recon_rmse_std_mm,"
             "reproj_ap_mean_px,reproj_ap_std_px,"
             "reproj_lat_mean_px,reproj_lat_std_px"]
    for c in sel:
        lines.append(",".join("%.17g" % v for v in (
            c.focal_level, c.recon_rmse_mean, c.recon_rmse_std,
            c.reproj_ap_mean, c.reproj_ap_std,
            c.reproj_lat_mean, c.reproj_lat_std)))
    _emit("\n".join(lines) + "\n", args.out)
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "sample": _cmd_sample,
    "trial": _cmd_trial,
    "figure": _cmd_figure,
}


def cli(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse already printed usage to stderr
        return 1 if exc.code else 0
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        for msg in exc.errors:
            print("config error: %s" % msg, file=sys.stderr)
        return 1
    except CarmSimError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


def main():  # console_scripts entry point
    sys.exit(cli())


if __name__ == "__main__":
    main()
