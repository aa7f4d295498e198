import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from thymodyn.agents import AbsConfig, run_abs
from thymodyn.scenarios import preset_params
from thymodyn.sd import SdConfig, Trajectory, run_sd
from thymodyn.validation import (
    TREC_DATA,
    CoverageError,
    FitReport,
    TrecBin,
    TrecDataset,
    compare_engines,
    dataset_to_percentage,
    fit_report,
    qualitative_checks,
    residuals,
    sse,
)

TABLE3 = [
    (0, 0, 5.03, 48), (1, 4, 4.93, 53), (5, 9, 4.86, 19), (10, 14, 4.86, 19),
    (15, 19, 4.56, 33), (20, 24, 3.88, 26), (25, 29, 3.75, 47), (30, 34, 3.61, 65),
    (35, 39, 3.54, 73), (40, 44, 3.52, 52), (45, 49, 3.37, 55), (50, 54, 3.17, 16),
]


def through_points(ages, pct):
    """A trajectory whose trec_pct is exactly ``pct`` at ``ages``."""
    pct = np.asarray(pct, dtype=float)
    return Trajectory(ages, pct, 100.0 - pct, np.zeros_like(pct))


class TestDataset:
    def test_golden_rows(self):
        assert len(TREC_DATA) == 12
        assert [(b.age_lo, b.age_hi, b.log10_trec, b.n) for b in TREC_DATA] == TABLE3
        assert TREC_DATA.total_individuals == 506

    def test_midpoints(self):
        mids = [b.age_mid for b in TREC_DATA]
        assert mids[:3] == [0.0, 2.5, 7.0] and mids[-1] == 52.0

    def test_csv_roundtrip(self, tmp_path):
        path = tmp_path / "trec.csv"
        TREC_DATA.to_csv(path)
        assert path.read_text().splitlines()[0] == "age_lo,age_hi,log10_trec,n"
        assert TrecDataset.from_csv(path) == TREC_DATA

    def test_unsorted_rejected(self):
        with pytest.raises(ValueError):
            TrecDataset([TrecBin(5, 9, 4.0, 1), TrecBin(0, 0, 5.0, 1)])


class TestPercentage:
    def test_examples(self):
        pct = dict(dataset_to_percentage())
        assert pct[0.0] == 100.0
        assert pct[52.0] == pytest.approx(100 * 10**-1.86, rel=1e-12)
        assert pct[52.0] == pytest.approx(1.380, abs=5e-4)
        assert pct[17.0] == pytest.approx(33.88, abs=5e-3)

    @given(st.lists(st.floats(0.0, 8.0), min_size=1, max_size=15))
    def test_monotone(self, values):
        logs = sorted(values, reverse=True)
        ds = TrecDataset(TrecBin(5 * i, 5 * i + 4, v, 1) for i, v in enumerate(logs))
        pct = [p for _, p in dataset_to_percentage(ds)]
        assert all(b <= a for a, b in zip(pct, pct[1:]))
        assert pct[0] == 100.0


class TestSse:
    def test_exact_interpolation_is_zero(self):
        ages, pct = zip(*dataset_to_percentage())
        assert sse(through_points(ages, pct)) == 0.0

    def test_unit_offset_gives_twelve(self):
        # trec_pct cannot exceed 100 at the birth bin, so the offset is applied downward
        ages, pct = zip(*dataset_to_percentage())
        tr = through_points(ages, np.array(pct) - 1.0)
        assert sse(tr) == pytest.approx(12.0, rel=1e-12)

    def test_short_horizon_is_coverage_error(self):
        tr = run_sd(SdConfig(horizon=40.0), preset_params(3))
        with pytest.raises(CoverageError, match="52"):
            sse(tr)

    def test_report_residuals_consistent(self, sd_runs):
        rep = fit_report(sd_runs[3], 3, "sd", 0.5)
        assert len(rep.residuals) == 12
        assert rep.sse == sum(r * r for r in rep.residuals)
        assert rep.sse == sse(sd_runs[3])

    def test_supersampling_invariant(self, presets):
        for p in presets.values():
            coarse = sse(run_sd(SdConfig(record_every=0.25), p))
            fine = sse(run_sd(SdConfig(record_every=1 / 64), p))
            assert abs(fine - coarse) / coarse < 1e-3

    def test_sd_deterministic_abs_varies(self):
        p = preset_params(3)
        sd_values = {sse(run_sd(SdConfig(horizon=55.0), p)) for _ in range(10)}
        assert len(sd_values) == 1
        abs_values = [
            sse(run_abs(AbsConfig(seed=s, horizon=55.0, replicates=2, scale=10.0), p).stats.mean_trajectory())
            for s in range(10)
        ]
        assert np.var(abs_values) > 0


class TestFitReport:
    def test_json_roundtrip(self, tmp_path):
        rep = FitReport("s3", "abs", 12.5, 1.25, None, [0.5, -1.0])
        path = tmp_path / "r.json"
        rep.to_json(path)
        back = FitReport.from_json(path)
        assert back == rep
        assert set(rep.to_dict()) == {"scenario", "engine", "sse", "wall_time_s", "peak_mem_bytes", "residuals"}

    def test_negative_sse_rejected(self):
        with pytest.raises(ValueError):
            FitReport("s1", "sd", -1.0, 0.1)


class TestCompare:
    def test_identical_reports(self):
        rep = FitReport("s2", "sd", 40.0, 0.3, 2048, [])
        summary = compare_engines(2, rep, rep)
        assert summary.sse_ratio == summary.time_ratio == summary.mem_ratio == 1.0

    def test_missing_memory(self):
        a = FitReport("s2", "sd", 40.0, 0.1, None)
        b = FitReport("s2", "abs", 44.0, 2.0, 1000)
        summary = compare_engines(2, a, b)
        assert summary.mem_ratio is None
        assert summary.time_ratio == pytest.approx(20.0)
        assert summary.sd_cheaper

    def test_scenario_mismatch(self):
        with pytest.raises(ValueError):
            compare_engines(1, FitReport("s1", "sd", 1, 1), FitReport("s2", "abs", 1, 1))


class TestQualitative:
    def test_all_zero_fails_everything(self):
        t = np.linspace(0, 100, 401)
        z = np.zeros_like(t)
        zero = Trajectory(t, z, z, z)
        findings = qualitative_checks({1: zero, 2: zero, 3: zero})
        assert len(findings) == 6
        assert not any(f.passed for f in findings)

    def test_scenario1_no_plateau(self, sd_runs):
        found = {f.name: f for f in qualitative_checks(sd_runs) if f.scenario == 1}
        assert found["no-plateau"].passed
        assert found["np-peak-then-decay"].passed

    def test_scenario3_shape(self, sd_runs):
        found = [f for f in qualitative_checks(sd_runs) if f.scenario == 3]
        assert [f.name for f in found] == ["n-early-decay", "n-midlife-stability", "n-exponential-decline"]
        assert all(f.passed for f in found), [str(f) for f in found]

    def test_flat_np_is_plateau(self):
        t = np.linspace(0, 100, 401)
        flat = Trajectory(t, np.full_like(t, 10.0), np.full_like(t, 500.0), np.zeros_like(t))
        (finding,) = [f for f in qualitative_checks({1: flat, 2: flat, 3: flat}) if f.scenario == 2]
        assert finding.passed
        assert "PASS" in str(finding)

    def test_missing_scenario(self, sd_runs):
        with pytest.raises(KeyError):
            qualitative_checks({1: sd_runs[1]})


def test_residual_sign_convention():
    ages, pct = zip(*dataset_to_percentage())
    r = residuals(through_points(ages, np.array(pct) * 0.5))
    assert np.all(r <= 0) and math.isclose(r[0], -50.0)
