"""Command-line front end.

    thymodyn run sd --scenario 3 --out results/
    thymodyn run abs --scenario 2 --seed 7 --replicates 30
    thymodyn bench [--scenario 1 --scenario 2 ...] [--engine sd]
    thymodyn plotdata --out results/

Exit codes: 0 success, 2 configuration error, 3 numeric/engine error.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import bench as _bench
from .agents import AbsConfigError
from .model import ActivesTable
from .scenarios import ConfigError, ScenarioSpec, parse_config
from .sd import IntegrationDiverged, Trajectory
from .validation import TREC_DATA, CoverageError, FitReport, dataset_to_percentage

EXIT_OK, EXIT_CONFIG, EXIT_ENGINE = 0, 2, 3
DEFAULT_OUT = "thymodyn_out"


class UsageError(Exception):
    pass


def default_out() -> Path:
    return Path(os.environ.get("THYMODYN_OUT", DEFAULT_OUT))


def _spec(args, scenario=None) -> ScenarioSpec:
    if args.config:
        spec = parse_config(args.config)
        if scenario is not None and scenario != spec.scenario:
            spec = ScenarioSpec(scenario, spec.overrides, spec.sd, spec.abs, spec.c_from)
        return spec
    return ScenarioSpec(scenario if scenario is not None else 3)


def _actives(args) -> ActivesTable | None:
    if not args.actives:
        return None
    try:
        return ActivesTable.from_csv(args.actives)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"actives table: {exc}") from None


def _sd_flags(args) -> dict:
    return {"dt": args.dt, "horizon": args.horizon}


def _abs_flags(args) -> dict:
    return {"dt": args.dt, "horizon": args.horizon, "seed": args.seed,
            "replicates": args.replicates, "scale": args.scale}


def cmd_run(engine: str, spec: ScenarioSpec, out_dir, actives=None, sd_flags=None, abs_flags=None,
            workers: int = 1) -> list[Path]:
    """Run one engine on one scenario and write its CSVs and FitReport JSON; return the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    p = spec.params()
    stem = f"{spec.label}_{engine}"
    written = []
    if engine == "sd":
        traj, report = _bench.timed_sd(spec.label, spec.sd_config(**(sd_flags or {})), p, actives)
        path = out / f"{stem}_trajectory.csv"
        traj.to_csv(path)
        written.append(path)
    elif engine == "abs":
        result, report = _bench.timed_abs(spec.label, spec.abs_config(**(abs_flags or {})), p, actives,
                                          workers=workers)
        for r, traj in enumerate(result.replicates):
            path = out / f"{stem}_rep{r:03d}.csv"
            traj.to_csv(path)
            written.append(path)
        path = out / f"{stem}_ensemble.csv"
        result.stats.to_csv(path)
        written.append(path)
    else:
        raise UsageError(f"unknown engine {engine!r}")
    path = out / f"{stem}_report.json"
    report.to_json(path)
    written.append(path)
    return written


def cmd_bench(specs: list[ScenarioSpec], engines=("sd", "abs"), actives=None, sd_flags=None,
              abs_flags=None, measure_memory: bool = True):
    """SD and ABS on each scenario at matched dt and horizon; returns (reports, comparisons)."""
    if not specs:
        raise UsageError("bench needs at least one scenario")
    cases = []
    for spec in specs:
        sd_cfg = spec.sd_config(**(sd_flags or {}))
        abs_cfg = _bench.matched(sd_cfg, spec.abs_config(**(abs_flags or {})))
        cases.append((spec.label, spec.params(), sd_cfg, abs_cfg))
    return _bench.bench(cases, engines, actives, measure_memory)


def _model_curve(out: Path, report_path: Path) -> Trajectory:
    stem = report_path.name[: -len("_report.json")]
    if stem.endswith("_sd"):
        return Trajectory.from_csv(out / f"{stem}_trajectory.csv")
    from .agents import EnsembleStats

    return EnsembleStats.from_csv(out / f"{stem}_ensemble.csv", replicates=1).mean_trajectory()


def cmd_plotdata(out_dir) -> list[Path]:
    """Write ``<scenario>_<engine>_overlay.csv`` for every run found in ``out_dir``.

    Each overlay holds the model TREC percentage curve (``series=model``)
    followed by the dataset points (``series=data``) in ``series,t,pct`` rows.
    """
    out = Path(out_dir)
    reports = sorted(out.glob("*_report.json")) if out.is_dir() else []
    if not reports:
        raise UsageError(f"no run outputs (*_report.json) found in {out}")
    data_points = dataset_to_percentage(TREC_DATA)
    written = []
    for report_path in reports:
        try:
            traj = _model_curve(out, report_path)
        except OSError as exc:
            raise UsageError(f"missing run output for {report_path.name}: {exc}") from None
        path = out / (report_path.name[: -len("_report.json")] + "_overlay.csv")
        with path.open("w") as fh:
            fh.write("series,t,pct\n")
            for t, pct in zip(traj.t, traj.trec_pct):
                fh.write(f"model,{float(t)!r},{float(pct)!r}\n")
            for age, pct in data_points:
                fh.write(f"data,{age!r},{pct!r}\n")
        written.append(path)
    TREC_DATA.to_csv(out / "trec_dataset.csv")
    return written


def _common(parser: argparse.ArgumentParser, multi_scenario: bool = False):
    if multi_scenario:
        parser.add_argument("--scenario", type=int, choices=(1, 2, 3), action="append",
                            help="scenario preset; repeat to bench several (default: all three)")
    else:
        parser.add_argument("--scenario", type=int, choices=(1, 2, 3), help="scenario preset (default 3)")
    parser.add_argument("--config", help="JSON scenario config file")
    parser.add_argument("--dt", type=float)
    parser.add_argument("--horizon", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--replicates", type=int)
    parser.add_argument("--scale", type=float)
    parser.add_argument("--actives", help="CSV table age_years,active_cells_per_mm3")
    parser.add_argument("--out", type=Path, help="output directory (default $THYMODYN_OUT or ./thymodyn_out)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thymodyn", description="Naive T-cell aging: SD and ABS engines")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one engine on one scenario")
    run.add_argument("engine", choices=("sd", "abs"))
    _common(run)
    run.add_argument("--workers", type=int, default=1, help="threads for ABS replicates")

    b = sub.add_parser("bench", help="time SD against ABS on the same scenarios")
    _common(b, multi_scenario=True)
    b.add_argument("--engine", choices=("sd", "abs"), help="run only this engine")
    b.add_argument("--no-memory", action="store_true", help="skip the peak-memory pass")

    pd = sub.add_parser("plotdata", help="write model/data overlay files for earlier runs")
    pd.add_argument("--out", type=Path)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = args.out or default_out()
    try:
        if args.command == "run":
            spec = _spec(args, args.scenario)
            paths = cmd_run(args.engine, spec, out, _actives(args), _sd_flags(args), _abs_flags(args),
                            workers=args.workers)
            report = FitReport.from_json(paths[-1])
            print(f"{spec.label} {args.engine}: SSE={report.sse:.4f} wall={report.wall_time_s:.3f}s "
                  f"-> {len(paths)} files in {out}")
        elif args.command == "bench":
            scenarios = args.scenario or ([None] if args.config else [1, 2, 3])
            specs = [_spec(args, s) for s in scenarios]
            engines = (args.engine,) if args.engine else ("sd", "abs")
            reports, comparisons = cmd_bench(specs, engines, _actives(args), _sd_flags(args),
                                             _abs_flags(args), measure_memory=not args.no_memory)
            print(_bench.format_table(reports))
            for c in comparisons:
                print(f"{c.scenario}: ABS/SD time x{c.time_ratio:.1f}, SSE x{c.sse_ratio:.2f}, "
                      f"SD cheaper: {c.sd_cheaper}")
            if args.out or os.environ.get("THYMODYN_OUT"):
                out.mkdir(parents=True, exist_ok=True)
                (out / "bench.json").write_text(_bench.bench_json(reports, comparisons) + "\n")
        elif args.command == "plotdata":
            for path in cmd_plotdata(out):
                print(path)
    except (ConfigError, AbsConfigError, UsageError) as exc:
        print(f"thymodyn: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationDiverged, CoverageError, ArithmeticError) as exc:
        print(f"thymodyn: engine error: {exc}", file=sys.stderr)
        return EXIT_ENGINE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
