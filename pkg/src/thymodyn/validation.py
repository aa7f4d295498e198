"""TREC validation data, SSE precision metric and qualitative trajectory checks."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .sd import Trajectory

__all__ = [
    "TrecBin",
    "TrecDataset",
    "TREC_DATA",
    "CoverageError",
    "FitReport",
    "ComparisonSummary",
    "Finding",
    "dataset_to_percentage",
    "sse",
    "residuals",
    "fit_report",
    "compare_engines",
    "qualitative_checks",
]


@dataclass(frozen=True)
class TrecBin:
    age_lo: float
    age_hi: float
    log10_trec: float  # mean log10 TREC per 10^6 PBMC
    n: int  # individuals in the bin

    @property
    def age_mid(self) -> float:
        return 0.0 if self.age_hi == 0 else (self.age_lo + self.age_hi) / 2


class TrecDataset(tuple):
    """Age-binned TREC measurements, ordered by age."""

    def __new__(cls, bins):
        bins = tuple(bins)
        if not bins:
            raise ValueError("dataset is empty")
        if any(b.age_lo > b.age_hi for b in bins):
            raise ValueError("bin with age_lo > age_hi")
        if any(b2.age_lo <= b1.age_lo for b1, b2 in zip(bins, bins[1:])):
            raise ValueError("bins must be sorted by age")
        return super().__new__(cls, bins)

    @property
    def total_individuals(self) -> int:
        return sum(b.n for b in self)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["age_lo", "age_hi", "log10_trec", "n"])
            for b in self:
                writer.writerow([repr(b.age_lo), repr(b.age_hi), repr(b.log10_trec), b.n])

    @classmethod
    def from_csv(cls, path) -> "TrecDataset":
        with Path(path).open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(
            TrecBin(float(r["age_lo"]), float(r["age_hi"]), float(r["log10_trec"]), int(r["n"]))
            for r in rows
        )


TREC_DATA = TrecDataset(
    TrecBin(lo, hi, v, n)
    for lo, hi, v, n in [
        (0, 0, 5.03, 48),
        (1, 4, 4.93, 53),
        (5, 9, 4.86, 19),
        (10, 14, 4.86, 19),
        (15, 19, 4.56, 33),
        (20, 24, 3.88, 26),
        (25, 29, 3.75, 47),
        (30, 34, 3.61, 65),
        (35, 39, 3.54, 73),
        (40, 44, 3.52, 52),
        (45, 49, 3.37, 55),
        (50, 54, 3.17, 16),
    ]
)


class CoverageError(ValueError):
    """Trajectory does not span the dataset's age range."""


def dataset_to_percentage(ds: TrecDataset = TREC_DATA) -> list[tuple[float, float]]:
    """``(age_mid, pct)`` pairs with TREC levels expressed relative to the first (birth) bin."""
    v0 = ds[0].log10_trec
    return [(b.age_mid, 100.0 * 10.0 ** (b.log10_trec - v0)) for b in ds]


def residuals(traj: Trajectory, ds: TrecDataset = TREC_DATA) -> np.ndarray:
    """Model minus data percentage at each bin midpoint (model linearly interpolated)."""
    ages, pct = (np.array(col) for col in zip(*dataset_to_percentage(ds)))
    if len(traj) == 0 or traj.t[0] > ages[0] + 1e-12 or traj.t[-1] < ages[-1] - 1e-12:
        span = "empty" if len(traj) == 0 else f"[{traj.t[0]}, {traj.t[-1]}]"
        raise CoverageError(f"trajectory span {span} does not cover ages {ages[0]}..{ages[-1]}")
    return traj.interp("trec_pct", ages) - pct


def sse(traj: Trajectory, ds: TrecDataset = TREC_DATA) -> float:
    r = residuals(traj, ds)
    return float(np.sum(r * r))


@dataclass
class FitReport:
    scenario: str
    engine: str
    sse: float
    wall_time_s: float
    peak_mem_bytes: int | None = None
    residuals: list = field(default_factory=list)

    def __post_init__(self):
        if self.sse < 0:
            raise ValueError("sse must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_json(cls, source) -> "FitReport":
        path = Path(source) if not str(source).lstrip().startswith("{") else None
        data = json.loads(path.read_text() if path else source)
        return cls(**data)


def fit_report(traj: Trajectory, scenario, engine: str, wall_time_s: float,
               peak_mem_bytes: int | None = None, ds: TrecDataset = TREC_DATA) -> FitReport:
    r = residuals(traj, ds)
    return FitReport(str(scenario), engine, float(np.sum(r * r)), wall_time_s, peak_mem_bytes,
                     [float(x) for x in r])


@dataclass
class ComparisonSummary:
    scenario: str
    sse: dict
    wall_time_s: dict
    peak_mem_bytes: dict
    sse_ratio: float  # abs / sd
    time_ratio: float
    mem_ratio: float | None
    sd_cheaper: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _ratio(a, b):
    if a is None or b is None:
        return None
    if b == 0:
        return 1.0 if a == 0 else math.inf
    return a / b


def compare_engines(scenario, sd_report: FitReport, abs_report: FitReport) -> ComparisonSummary:
    """Side-by-side SSE / time / memory, ratios expressed as ABS over SD."""
    if sd_report.scenario != abs_report.scenario:
        raise ValueError(f"reports are for different scenarios: {sd_report.scenario} vs {abs_report.scenario}")
    mem_ratio = _ratio(abs_report.peak_mem_bytes, sd_report.peak_mem_bytes)
    time_ratio = _ratio(abs_report.wall_time_s, sd_report.wall_time_s)
    cheaper = time_ratio > 1 and (mem_ratio is None or mem_ratio >= 1)
    return ComparisonSummary(
        scenario=str(scenario),
        sse={"sd": sd_report.sse, "abs": abs_report.sse},
        wall_time_s={"sd": sd_report.wall_time_s, "abs": abs_report.wall_time_s},
        peak_mem_bytes={"sd": sd_report.peak_mem_bytes, "abs": abs_report.peak_mem_bytes},
        sse_ratio=_ratio(abs_report.sse, sd_report.sse),
        time_ratio=time_ratio,
        mem_ratio=mem_ratio,
        sd_cheaper=cheaper,
    )


# -- qualitative findings ------------------------------------------------------

PLATEAU_WINDOW = (60.0, 100.0)
PLATEAU_TOL = 0.02


@dataclass(frozen=True)
class Finding:
    scenario: int
    name: str
    passed: bool
    detail: str

    def __str__(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] scenario {self.scenario} {self.name}: {self.detail}"


def relative_change(traj: Trajectory, column: str, t0: float, t1: float) -> float:
    """``|x(t1) - x(t0)| / x(t0)``; infinite when ``x(t0)`` is not positive."""
    a, b = (float(v) for v in traj.interp(column, [t0, t1]))
    if not a > 0:
        return math.inf
    return abs(b - a) / a


def _s1_checks(tr: Trajectory) -> list[Finding]:
    i = int(np.argmax(tr.np))
    peak, t_peak = float(tr.np[i]), float(tr.t[i])
    interior = peak > 0 and 0 < i < len(tr) - 1
    end = float(tr.np[-1])
    decays = interior and end < 0.5 * peak and bool(np.all(np.diff(tr.np[i:]) <= 0))
    change = relative_change(tr, "np", *PLATEAU_WINDOW)
    return [
        Finding(1, "np-peak-then-decay", decays,
                f"peak {peak:.4g} at t={t_peak:g}, final {end:.4g}"),
        Finding(1, "no-plateau", interior and math.isfinite(change) and change >= PLATEAU_TOL,
                f"relative Np change over {PLATEAU_WINDOW} = {change:.4g}"),
    ]


def _s2_checks(tr: Trajectory) -> list[Finding]:
    change = relative_change(tr, "np", *PLATEAU_WINDOW)
    return [
        Finding(2, "np-plateau", change < PLATEAU_TOL,
                f"relative Np change over {PLATEAU_WINDOW} = {change:.4g} (limit {PLATEAU_TOL})"),
    ]


def _s3_checks(tr: Trajectory, lambda_t: float) -> list[Finding]:
    # Work with N detrended by the thymic decay: log N + lambda_t * t is flat
    # exactly when N follows the thymic exponential.
    early = tr.window(0.0, 2.0)
    post = tr.window(20.0, tr.t[-1])
    if not (np.any(early) and np.any(post)) or np.any(tr.n[tr.window(0.0, tr.t[-1])] <= 0):
        return [Finding(3, name, False, "naive pool empty or trajectory too short")
                for name in ("n-early-decay", "n-midlife-stability", "n-exponential-decline")]
    detr = np.log(tr.n) + lambda_t * tr.t
    early_peak = float(np.max(detr[early]))
    at10 = float(np.interp(10.0, tr.t, detr))
    early_drop = early_peak - at10
    spread = float(np.ptp(detr[post]))
    slope = float(np.polyfit(tr.t[post], np.log(tr.n[post]), 1)[0])
    ratio = float(tr.interp("n", tr.t[-1]) / tr.interp("n", 20.0))
    return [
        Finding(3, "n-early-decay", early_drop > 0.25,
                f"detrended log N falls {early_drop:.3f} between its early peak and t=10"),
        Finding(3, "n-midlife-stability", spread < 0.1,
                f"detrended log N spread over t>=20 is {spread:.3f} (limit 0.1)"),
        Finding(3, "n-exponential-decline",
                abs(slope + lambda_t) < 0.1 * lambda_t and ratio < 0.2,
                f"log-slope {slope:.4f}/yr vs thymic {-lambda_t:.4f}/yr, N(end)/N(20) = {ratio:.3g}"),
    ]


def qualitative_checks(traj_by_scenario: dict, lambda_t: float = math.log(2) / 15.7) -> list[Finding]:
    """Evaluate the expected trajectory shapes for scenarios 1-3.

    ``traj_by_scenario`` maps scenario id (1, 2, 3) to a trajectory. Findings
    are returned, never raised.
    """
    missing = {1, 2, 3} - set(traj_by_scenario)
    if missing:
        raise KeyError(f"missing scenario trajectories: {sorted(missing)}")
    return (
        _s1_checks(traj_by_scenario[1])
        + _s2_checks(traj_by_scenario[2])
        + _s3_checks(traj_by_scenario[3], lambda_t)
    )
