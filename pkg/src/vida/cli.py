"""Command-line entry point: ``vida run | design | sweep | gen-fixture``."""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import logging
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .domain import SimParams, ValidationError
from .engine import BatchError, resolve_threads, run_batch
from .experiments import (SWEEPABLE, SweepSpec, aggregate, area_reports, region_reports, run_design,
                          run_sweep, write_area_geojson, write_metrics_csv, write_report_csv)
from .population import (ProfileFormatError, bundled_profiles_path, load_area_profiles, synthetic_profile,
                         write_area_profiles)

log = logging.getLogger("vida")

_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(SimParams)}


class CliError(Exception):
    pass


def default_config_path() -> Path:
    return Path(str(resources.files("vida") / "data" / "default.ini"))


def read_config(path: Path) -> tuple[dict, dict]:
    """Parse the INI config into SimParams keyword arguments and I/O settings."""
    if not path.is_file():
        raise CliError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise CliError(f"cannot parse config {path}: {exc}")

    params: dict = {}
    if parser.has_section("simulation"):
        for key in parser.options("simulation"):
            kind = _FIELD_TYPES.get(key)
            if kind is None:
                raise CliError(f"{path}: unknown simulation key {key!r}")
            try:
                if kind == "bool":
                    params[key] = parser.getboolean("simulation", key)
                elif kind == "int":
                    params[key] = parser.getint("simulation", key)
                else:
                    params[key] = parser.getfloat("simulation", key)
            except ValueError as exc:
                raise CliError(f"{path}: bad value for {key!r}: {exc}")

    io: dict = {}
    if parser.has_option("inputs", "profiles"):
        io["profiles"] = (path.parent / parser.get("inputs", "profiles")).resolve()
    if parser.has_option("outputs", "out_dir"):
        io["out_dir"] = (path.parent / parser.get("outputs", "out_dir")).resolve()
    return params, io


def _settings(args) -> tuple[SimParams, Path, Path, int]:
    config = Path(args.config) if args.config else default_config_path()
    values, io = read_config(config)
    overrides = {
        "master_seed": args.seed, "replications": args.replications, "steps_per_run": args.steps,
        "deterrence_enabled": args.deterrence, "distancing_enabled": args.distancing,
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    params = SimParams(**values)
    profiles = Path(args.profiles) if args.profiles else io.get("profiles", bundled_profiles_path())
    out_dir = Path(args.out_dir) if args.out_dir else io.get("out_dir", Path("vida-output"))
    return params, Path(profiles), Path(out_dir), resolve_threads(args.threads)


def _load(profiles_path: Path):
    if not profiles_path.is_file():
        raise CliError(f"profiles file not found: {profiles_path}")
    profiles = load_area_profiles(profiles_path)
    if not profiles:
        raise CliError(f"profiles file {profiles_path} contains no areas")
    return profiles


def cmd_run(args) -> int:
    params, profiles_path, out_dir, threads = _settings(args)
    profiles = _load(profiles_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics = run_batch(profiles, params, threads=threads)
    overall = aggregate("all", metrics, params)
    areas = area_reports(metrics, params)
    regions = region_reports(metrics, profiles, params)
    write_report_csv([overall] + regions + areas, out_dir / "run_report.csv")
    write_metrics_csv([overall], out_dir / "run_metrics.csv")
    if any(p.geometry for p in profiles):
        write_area_geojson(areas, profiles, out_dir / "areas.geojson")
    print(f"cases/100k mean={overall.cases_mean:.2f} denounces/100k mean={overall.denounces_mean:.2f} "
          f"(replications={params.replications}, areas={len(profiles)}, seed={params.master_seed})")
    return 0


def cmd_design(args) -> int:
    params, profiles_path, out_dir, threads = _settings(args)
    profiles = _load(profiles_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    reports = run_design(profiles, params, threads=threads)
    write_report_csv(reports, out_dir / "design_report.csv")
    write_metrics_csv(reports, out_dir / "design_metrics.csv")
    for r in reports:
        print(f"{r.cell_id}: cases/100k={r.cases_mean:.2f} denounces/100k={r.denounces_mean:.2f}")
    return 0


def _parse_grid(text: str) -> list[float]:
    try:
        grid = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise CliError(f"grid must be comma-separated numbers, got {text!r}")
    if not grid:
        raise CliError("grid must contain at least one value")
    return grid


def cmd_sweep(args) -> int:
    if args.parameter not in SWEEPABLE:
        raise CliError(f"unknown parameter {args.parameter!r}; valid names: {', '.join(SWEEPABLE)}")
    params, profiles_path, out_dir, threads = _settings(args)
    grid = _parse_grid(args.grid)
    spec = SweepSpec(args.parameter, grid, params, _load(profiles_path))
    out_dir.mkdir(parents=True, exist_ok=True)
    reports = run_sweep(spec, threads=threads)
    write_report_csv(reports, out_dir / f"sweep_{args.parameter}.csv")
    write_metrics_csv(reports, out_dir / f"sweep_{args.parameter}_metrics.csv")
    for r in reports:
        print(f"{r.cell_id}: cases/100k={r.cases_mean:.2f} denounces/100k={r.denounces_mean:.2f}")
    return 0


def cmd_gen_fixture(args) -> int:
    """Write ``--areas`` synthetic profiles jittered around the given means."""
    base = synthetic_profile(
        num_families_sample=args.families, pct_female_black=args.pct_black, pct_male_black=args.pct_black,
        age_mean=args.age_mean, age_sd=args.age_sd, schooling_mean=args.schooling_mean,
        schooling_sd=args.schooling_sd, income_mean=args.income_mean, income_sd=args.income_sd,
        avg_children=args.children)
    if args.areas < 1:
        raise CliError("--areas must be >= 1")
    rng = np.random.default_rng(args.seed)
    profiles = []
    for i in range(args.areas):
        jitter = rng.uniform(1 - args.spread, 1 + args.spread, size=4)
        profiles.append(dataclasses.replace(
            base, area_id=f"{args.region}-{i + 1:02d}", region_id=args.region, name=f"{args.region} area {i + 1}",
            age_mean=round(base.age_mean * jitter[0], 2),
            schooling_mean=round(min(base.schooling_mean * jitter[1], 17.0), 2),
            income_mean=round(base.income_mean * jitter[2], 2),
            pct_female_black=round(min(base.pct_female_black * jitter[3], 1.0), 4),
            pct_male_black=round(min(base.pct_male_black * jitter[3], 1.0), 4),
        ))
    write_area_profiles(profiles, args.output, comment=f"synthetic fixture (seed={args.seed})")
    print(f"wrote {len(profiles)} area profiles to {args.output}")
    return 0


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file (default: bundled default.ini)")
    p.add_argument("--seed", type=int, help="master seed; the only source of randomness")
    p.add_argument("--replications", type=int, help="replications per area")
    p.add_argument("--steps", type=int, help="steps per replication")
    p.add_argument("--deterrence", action=argparse.BooleanOptionalAction, default=None,
                   help="enable the denounce/protection/conviction ladder")
    p.add_argument("--distancing", action=argparse.BooleanOptionalAction, default=None,
                   help="force every adult to stay at home")
    p.add_argument("--threads", type=int, help="worker threads (default: $VIDA_THREADS or CPU count)")
    p.add_argument("--out-dir", help="directory for output files")
    p.add_argument("--profiles", help="area-profile CSV file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vida", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a batch and write per-area reports")
    _common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("design", help="run the 2x2 deterrence x distancing design")
    _common(p)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("sweep", help="sweep one modeller-controlled parameter")
    _common(p)
    p.add_argument("--parameter", required=True, help=f"one of: {', '.join(SWEEPABLE)}")
    p.add_argument("--grid", required=True, help="comma-separated values, e.g. 0.1,0.44,0.9")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen-fixture", help="write a synthetic area-profile file")
    p.add_argument("--output", required=True, help="destination CSV path")
    p.add_argument("--areas", type=int, default=8, help="number of areas")
    p.add_argument("--families", type=int, default=1000, help="families sampled per area")
    p.add_argument("--region", default="synthetic", help="region id and area-id prefix")
    p.add_argument("--seed", type=int, default=0, help="seed for the per-area jitter")
    p.add_argument("--spread", type=float, default=0.15, help="relative jitter of area means")
    p.add_argument("--age-mean", type=float, default=38.0)
    p.add_argument("--age-sd", type=float, default=12.0)
    p.add_argument("--schooling-mean", type=float, default=8.0)
    p.add_argument("--schooling-sd", type=float, default=4.0)
    p.add_argument("--income-mean", type=float, default=1500.0)
    p.add_argument("--income-sd", type=float, default=1200.0)
    p.add_argument("--children", type=float, default=1.2, help="mean children per couple")
    p.add_argument("--pct-black", type=float, default=0.5)
    p.set_defaults(func=cmd_gen_fixture)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, ValidationError, ProfileFormatError, BatchError, ValueError, OSError) as exc:
        print(f"vida {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
