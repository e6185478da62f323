"""Experiment suites over the engine, their aggregation and file writers."""

from __future__ import annotations

import csv
import json
import logging
import statistics
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import shapely.wkt

from .domain import AreaProfile, RunMetrics, SimParams, ValidationError
from .engine import run_batch

log = logging.getLogger(__name__)

SWEEPABLE = ("gender_stress_male", "pct_employed", "pct_gun", "pct_addicted")

REPORT_COLUMNS = [
    "cell_id", "parameter_value",
    "cases_mean", "cases_median", "cases_sd",
    "denounces_mean", "denounces_median", "denounces_sd",
    "replications", "seed",
]

METRICS_COLUMNS = [
    "cell_id", "replication_id", "area_id", "women_count", "attacks", "denounces",
    "protections", "convictions", "cases_per_100k", "denounces_per_100k",
]


@dataclass
class SweepSpec:
    parameter: str
    grid: Sequence[float]
    base_params: SimParams
    profiles: Sequence[AreaProfile]

    def __post_init__(self):
        if self.parameter not in SWEEPABLE:
            raise ValidationError("parameter", f"{self.parameter!r} is not sweepable; choose one of {', '.join(SWEEPABLE)}")
        if len(self.grid) == 0:
            raise ValidationError("grid", "must contain at least one value")
        for value in self.grid:
            self.base_params.replace(**{self.parameter: value})
        if not self.profiles:
            raise ValidationError("profiles", "at least one area profile is required")


@dataclass
class ExperimentReport:
    cell_id: str
    parameter_value: Optional[float]
    cases_mean: float
    cases_median: float
    cases_sd: float
    denounces_mean: float
    denounces_median: float
    denounces_sd: float
    replications: int
    seed: int
    metrics: list = field(default_factory=list, repr=False)

    def row(self) -> list:
        return [getattr(self, c) for c in REPORT_COLUMNS]


def _summary(values: list[float]) -> tuple[float, float, float]:
    sd = statistics.stdev(values) if len(values) > 1 else 0.0
    return statistics.fmean(values), statistics.median(values), sd


def pooled_rates(metrics: Iterable[RunMetrics]) -> tuple[list[float], list[float]]:
    """Per-replication case and denounce rates, pooling all areas of a replication."""
    pooled: dict[int, list[int]] = defaultdict(lambda: [0, 0, 0])
    for m in metrics:
        acc = pooled[m.replication_id]
        acc[0] += m.attacks
        acc[1] += m.denounces
        acc[2] += m.women_count
    reps = sorted(pooled)
    cases = [pooled[r][0] / pooled[r][2] * 100000 for r in reps]
    denounces = [pooled[r][1] / pooled[r][2] * 100000 for r in reps]
    return cases, denounces


def aggregate(cell_id: str, metrics: Sequence[RunMetrics], params: SimParams,
              parameter_value: Optional[float] = None) -> ExperimentReport:
    metrics = list(metrics)
    cases, denounces = pooled_rates(metrics)
    if not cases:
        raise ValueError(f"cell {cell_id!r} has no replications")
    return ExperimentReport(cell_id, parameter_value, *_summary(cases), *_summary(denounces),
                            replications=len(cases), seed=params.master_seed, metrics=metrics)


def area_reports(metrics: Sequence[RunMetrics], params: SimParams) -> list[ExperimentReport]:
    """One report per area, in first-seen order."""
    by_area: dict[str, list[RunMetrics]] = defaultdict(list)
    for m in metrics:
        by_area[m.area_id].append(m)
    return [aggregate(area_id, ms, params) for area_id, ms in by_area.items()]


def region_reports(metrics: Sequence[RunMetrics], profiles: Sequence[AreaProfile],
                   params: SimParams) -> list[ExperimentReport]:
    """One report per metropolitan region, pooling its areas."""
    region_of = {p.area_id: p.region_id for p in profiles}
    by_region: dict[str, list[RunMetrics]] = defaultdict(list)
    for m in metrics:
        by_region[region_of[m.area_id]].append(m)
    return [aggregate(region, ms, params) for region, ms in by_region.items()]


def run_cell(cell_id: str, profiles: Sequence[AreaProfile], params: SimParams,
             parameter_value: Optional[float] = None, threads: int | None = None) -> ExperimentReport:
    return aggregate(cell_id, run_batch(profiles, params, threads=threads), params, parameter_value)


def run_sweep(spec: SweepSpec, threads: int | None = None) -> list[ExperimentReport]:
    reports = []
    for value in spec.grid:
        params = spec.base_params.replace(**{spec.parameter: value})
        log.info("sweep %s=%r", spec.parameter, value)
        reports.append(run_cell(f"{spec.parameter}={value!r}", spec.profiles, params, value, threads))
    return reports


def design_cell_id(deterrence: bool, distancing: bool) -> str:
    return f"deterrence={str(deterrence).lower()};distancing={str(distancing).lower()}"


def run_design(profiles: Sequence[AreaProfile], base_params: SimParams,
               threads: int | None = None) -> list[ExperimentReport]:
    """The 2x2 deterrence x distancing design, all cells on the same seed plan."""
    reports = []
    for deterrence in (False, True):
        for distancing in (False, True):
            params = base_params.replace(deterrence_enabled=deterrence, distancing_enabled=distancing)
            reports.append(run_cell(design_cell_id(deterrence, distancing), profiles, params, threads=threads))
    return reports


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_report_csv(reports: Iterable[ExperimentReport], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for report in reports:
            writer.writerow([_fmt(v) for v in report.row()])


def read_report_csv(path) -> list[dict]:
    out = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            parsed: dict = {"cell_id": row["cell_id"]}
            parsed["parameter_value"] = float(row["parameter_value"]) if row["parameter_value"] else None
            for c in REPORT_COLUMNS[2:8]:
                parsed[c] = float(row[c])
            parsed["replications"] = int(row["replications"])
            parsed["seed"] = int(row["seed"])
            out.append(parsed)
    return out


def write_metrics_csv(reports: Iterable[ExperimentReport], path) -> None:
    """Raw per-replication metrics behind each report."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRICS_COLUMNS)
        for report in reports:
            for m in report.metrics:
                d = m.to_dict()
                writer.writerow([report.cell_id] + [_fmt(d[c]) for c in METRICS_COLUMNS[1:]])


def write_area_geojson(reports: Sequence[ExperimentReport], profiles: Sequence[AreaProfile], path) -> list[str]:
    """Write one feature per area report; returns the warnings raised.

    Reports are matched to profiles by ``cell_id == area_id``. Areas without
    a geometry are still written, with a null geometry.
    """
    by_id = {p.area_id: p for p in profiles}
    warnings: list[str] = []
    features = []
    for report in reports:
        profile = by_id.get(report.cell_id)
        geometry = None
        if profile is not None and profile.geometry:
            geometry = shapely.wkt.loads(profile.geometry).__geo_interface__
        else:
            msg = f"area {report.cell_id!r} has no geometry; feature written with null geometry"
            log.warning(msg)
            warnings.append(msg)
        features.append({
            "type": "Feature",
            "geometry": json.loads(json.dumps(geometry)),
            "properties": {
                "area_id": report.cell_id,
                "name": profile.name if profile is not None else report.cell_id,
                "cases_per_100k_mean": report.cases_mean,
                "denounces_per_100k_mean": report.denounces_mean,
            },
        })
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump({"type": "FeatureCollection", "features": features}, fh, indent=1)
        fh.write("\n")
    return warnings
