"""Report serialization: canonical CSV for figure reproduction plus a JSON
mirror carrying provenance. Numbers are written with 17 significant digits
so serialization round-trips byte-identically."""

from __future__ import annotations

import json

from .errors import IoError
from .experiment import CellStats, ExperimentReport

SCHEMA_VERSION = 1

CSV_COLUMNS = ("pp_level_px", "focal_level_px", "n_trials", "n_failed",
               "recon_rmse_mean_mm", "recon_rmse_std_mm",
               "reproj_ap_mean_px", "reproj_ap_std_px",
               "reproj_lat_mean_px", "reproj_lat_std_px")


def _fmt(x) -> str:
    return "%.17g" % float(x)


def _csv_row(c: CellStats) -> str:
    return ",".join([
        _fmt(c.pp_level), _fmt(c.focal_level),
        str(c.n_trials), str(c.n_failed),
        _fmt(c.recon_rmse_mean), _fmt(c.recon_rmse_std),
        _fmt(c.reproj_ap_mean), _fmt(c.reproj_ap_std),
        _fmt(c.reproj_lat_mean), _fmt(c.reproj_lat_std),
    ])


def render_csv(report: ExperimentReport) -> str:
    lines = [",".join(CSV_COLUMNS)]
    lines.extend(_csv_row(c) for c in report.cells)
    return "\n".join(lines) + "\n"


def render_json(report: ExperimentReport) -> str:
    """Deterministic JSON text with 17-significant-digit numbers.

    Rendered by hand (not json.dumps) to control float formatting exactly.
    """
    out = []
    out.append("{")
    out.append('  "schema_version": %d,' % SCHEMA_VERSION)
    out.append('  "seed": %d,' % report.seed)
    out.append('  "config_digest": %s,' % json.dumps(report.config_digest))
    out.append('  "trials_per_cell": %d,' % report.trials_per_cell)
    out.append('  "partial_results": %s,'
               % ("true" if report.partial_results else "false"))
    out.append('  "std_estimator": %s,' % json.dumps(report.std_estimator))
    out.append('  "cells": [')
    rows = []
    for c in report.cells:
        fields = [
            '"pp_level_px": %s' % _fmt(c.pp_level),
            '"focal_level_px": %s' % _fmt(c.focal_level),
            '"n_trials": %d' % c.n_trials,
            '"n_failed": %d' % c.n_failed,
            '"recon_rmse_mean_mm": %s' % _fmt(c.recon_rmse_mean),
            '"recon_rmse_std_mm": %s' % _fmt(c.recon_rmse_std),
            '"reproj_ap_mean_px": %s' % _fmt(c.reproj_ap_mean),
            '"reproj_ap_std_px": %s' % _fmt(c.reproj_ap_std),
            '"reproj_lat_mean_px": %s' % _fmt(c.reproj_lat_mean),
            '"reproj_lat_std_px": %s' % _fmt(c.reproj_lat_std),
        ]
        rows.append("    {" + ", ".join(fields) + "}")
    out.append(",\n".join(rows))
    out.append("  ]")
    out.append("}")
    return "\n".join(out) + "\n"


def write_report(report: ExperimentReport, fmt: str, path: str) -> None:
    if fmt == "csv":
        text = render_csv(report)
    elif fmt == "json":
        text = render_json(report)
    else:
        raise ValueError("format must be 'csv' or 'json', got %r" % fmt)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError("cannot write report to %r: %s" % (path, exc))


def _parse_cell(values: dict) -> CellStats:
    return CellStats(
        pp_level=float(values["pp_level_px"]),
        focal_level=float(values["focal_level_px"]),
        n_trials=int(values["n_trials"]),
        n_failed=int(values["n_failed"]),
        recon_rmse_mean=float(values["recon_rmse_mean_mm"]),
        recon_rmse_std=float(values["recon_rmse_std_mm"]),
        reproj_ap_mean=float(values["reproj_ap_mean_px"]),
        reproj_ap_std=float(values["reproj_ap_std_px"]),
        reproj_lat_mean=float(values["reproj_lat_mean_px"]),
        reproj_lat_std=float(values["reproj_lat_std_px"]),
    )


def read_report_csv(path: str):
    """Parse a report CSV back into CellStats rows."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln for ln in fh.read().splitlines() if ln]
    except OSError as exc:
        raise IoError("cannot read report %r: %s" % (path, exc))
    if not lines or tuple(lines[0].split(",")) != CSV_COLUMNS:
        raise IoError("%r does not look like a carmsim report CSV" % path)
    cells = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(CSV_COLUMNS):
            raise IoError("malformed report row: %r" % ln)
        cells.append(_parse_cell(dict(zip(CSV_COLUMNS, parts))))
    return cells


def read_report_json(path: str) -> ExperimentReport:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoError("cannot read report %r: %s" % (path, exc))
    except json.JSONDecodeError as exc:
        raise IoError("malformed report JSON %r: %s" % (path, exc))
    cells = tuple(_parse_cell(c) for c in doc["cells"])
    return ExperimentReport(cells=cells, seed=int(doc["seed"]),
                            config_digest=doc["config_digest"],
                            trials_per_cell=int(doc["trials_per_cell"]),
                            partial_results=bool(doc["partial_results"]),
                            std_estimator=doc["std_estimator"])
