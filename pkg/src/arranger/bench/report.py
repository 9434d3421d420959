"""CSV report and plot-series export for benchmark results."""

from __future__ import annotations

import csv
import json
from typing import TextIO

from .experiments import BenchReport, Row

COLUMNS = ("experiment", "parameter", "mean", "std", "cv", "unit", "repetitions")

# figure -> experiments drawn on it, with the x-axis label
FIGURES = {
    "size": (("size.compressed", "size.tag"), "requests per batch"),
    "throughput": (("hash", "compress", "trans"), "requests per batch"),
    "sign": (("sign",), "signer"),
    "aggregation": (("agg",), "signatures per aggregation"),
    "verification": (("ver",), "worker processes"),
}


def write_csv(report: BenchReport, out: TextIO) -> None:
    w = csv.writer(out)
    w.writerow(COLUMNS)
    for r in report.rows:
        w.writerow([r.experiment, r.parameter, f"{r.mean:.6g}", f"{r.std:.6g}", f"{r.cv:.4f}", r.unit, len(r.samples)])


def read_csv(src: TextIO) -> BenchReport:
    rows = []
    for rec in csv.DictReader(src):
        rows.append(Row(rec["experiment"], int(rec["parameter"]), float(rec["mean"]), float(rec["std"]), rec["unit"]))
    return BenchReport(rows)


def plot_series(report: BenchReport) -> dict:
    """Per figure, one x/y/err series per experiment that has data."""
    figs = {}
    for fig, (names, xlabel) in FIGURES.items():
        series = {}
        for name in names:
            pts = sorted(report.series(name).values(), key=lambda r: r.parameter)
            if pts:
                series[name] = {
                    "x": [r.parameter for r in pts],
                    "y": [r.mean for r in pts],
                    "err": [r.std for r in pts],
                    "unit": pts[0].unit,
                }
        if series:
            figs[fig] = {"xlabel": xlabel, "series": series}
    return figs


def write_plot_json(report: BenchReport, out: TextIO) -> None:
    json.dump(plot_series(report), out, indent=1, sort_keys=True)
    out.write("\n")
