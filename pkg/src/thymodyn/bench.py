"""Timed engine runs and the SD-vs-ABS resource/precision comparison."""
from __future__ import annotations

import json
import time
import tracemalloc
from dataclasses import replace

from .agents import AbsConfig, AbsResult, run_abs
from .model import ActivesTable, ModelParams
from .sd import SdConfig, Trajectory, run_sd
from .validation import FitReport, compare_engines, fit_report

__all__ = ["warm_up", "timed_sd", "timed_abs", "bench", "format_table"]

_warm = False


def warm_up() -> None:
    """Trigger JIT compilation so it is not billed to the first timed run."""
    global _warm
    if _warm:
        return
    p = ModelParams(lambda_n=0.1, np_bar=300.0, s_bar=0.1, b=0.1, c=0.1, lambda_mn=0.1, lambda_a=0.1)
    run_sd(SdConfig(dt=0.25, horizon=1.0, record_every=0.5), p)
    run_abs(AbsConfig(dt=0.0078125, horizon=1.0, record_every=0.5, replicates=1), p)
    _warm = True


def _peak_memory(fn) -> int:
    tracemalloc.start()
    try:
        fn()
        return tracemalloc.get_traced_memory()[1]
    finally:
        tracemalloc.stop()


def timed_sd(label, cfg: SdConfig, p: ModelParams, actives: ActivesTable | None = None,
             measure_memory: bool = False) -> tuple[Trajectory, FitReport]:
    warm_up()
    start = time.perf_counter()
    traj = run_sd(cfg, p, actives)
    wall = time.perf_counter() - start
    # memory is traced on a separate pass so tracing overhead stays out of the timing
    peak = _peak_memory(lambda: run_sd(cfg, p, actives)) if measure_memory else None
    return traj, fit_report(traj, label, "sd", wall, peak)


def timed_abs(label, cfg: AbsConfig, p: ModelParams, actives: ActivesTable | None = None,
              measure_memory: bool = False, workers: int = 1) -> tuple[AbsResult, FitReport]:
    """Run the ensemble; the report's SSE is computed on the ensemble-mean trajectory."""
    warm_up()
    start = time.perf_counter()
    result = run_abs(cfg, p, actives, workers=workers)
    wall = time.perf_counter() - start
    peak = _peak_memory(lambda: run_abs(cfg, p, actives, workers=workers)) if measure_memory else None
    return result, fit_report(result.stats.mean_trajectory(), label, "abs", wall, peak)


def bench(cases, engines=("sd", "abs"), actives: ActivesTable | None = None,
          measure_memory: bool = True) -> tuple[list[FitReport], list]:
    """Run each ``(label, params, SdConfig, AbsConfig)`` case on the selected engines, one at a time.

    Returns the reports (scenario-major, SD before ABS) and, where both
    engines ran, the per-scenario :class:`~thymodyn.validation.ComparisonSummary`.
    """
    reports, comparisons = [], []
    for label, p, sd_cfg, abs_cfg in cases:
        by_engine = {}
        if "sd" in engines:
            by_engine["sd"] = timed_sd(label, sd_cfg, p, actives, measure_memory)[1]
        if "abs" in engines:
            by_engine["abs"] = timed_abs(label, abs_cfg, p, actives, measure_memory)[1]
        reports.extend(by_engine.values())
        if len(by_engine) == 2:
            comparisons.append(compare_engines(label, by_engine["sd"], by_engine["abs"]))
    return reports, comparisons


def format_table(reports: list[FitReport]) -> str:
    """Aligned text table: scenario, engine, time, memory, SSE."""
    header = f"{'scenario':<10}{'engine':<8}{'time (s)':>12}{'peak mem (MB)':>16}{'SSE':>14}"
    lines = [header, "-" * len(header)]
    for r in reports:
        mem = "n/a" if r.peak_mem_bytes is None else f"{r.peak_mem_bytes / 2**20:.2f}"
        lines.append(f"{r.scenario:<10}{r.engine:<8}{r.wall_time_s:>12.4f}{mem:>16}{r.sse:>14.2f}")
    return "\n".join(lines)


def bench_json(reports, comparisons) -> str:
    return json.dumps(
        {"reports": [r.to_dict() for r in reports], "comparisons": [c.to_dict() for c in comparisons]},
        indent=2,
    )


def matched(sd_cfg: SdConfig, abs_cfg: AbsConfig) -> AbsConfig:
    """ABS config using the SD step and horizon, so timings compare like with like."""
    return replace(abs_cfg, dt=sd_cfg.dt, horizon=sd_cfg.horizon, record_every=sd_cfg.record_every)
