"""One test per acceptance criterion; each records a PASS/FAIL line shown in the terminal summary."""
import math
import time

import numpy as np

import conftest
from thymodyn.agents import AbsConfig, run_abs
from thymodyn.cli import cmd_bench
from thymodyn.model import ModelParams, StateVector, derivatives
from thymodyn.scenarios import ScenarioSpec, preset_params
from thymodyn.sd import SdConfig, run_sd
from thymodyn.validation import TREC_DATA, qualitative_checks, sse


def record(number, title, passed, detail):
    conftest.ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {number}. {title}: {detail}")
    return passed


def test_1_sse_ordering():
    start = time.perf_counter()
    values = {k: sse(run_sd(SdConfig(), preset_params(k))) for k in (1, 2, 3)}
    elapsed = time.perf_counter() - start
    ordered = values[3] < values[2] < values[1]
    detail = ", ".join(f"s{k}={v:.1f}" for k, v in values.items()) + f"; {elapsed:.2f}s"
    assert record(1, "SD SSE ordering s3 < s2 < s1", ordered and elapsed < 10, detail), detail


def test_2_qualitative_shapes(sd_runs):
    findings = qualitative_checks(sd_runs)
    failed = [str(f) for f in findings if not f.passed]
    detail = f"{len(findings) - len(failed)}/{len(findings)} findings pass"
    if failed:
        detail += "; failing: " + "; ".join(failed)
    assert record(2, "qualitative trajectory shapes", not failed, detail), detail


def test_3_sd_abs_agreement(sd_runs):
    start = time.perf_counter()
    worst = {}
    for k in (1, 2, 3):
        stats = run_abs(AbsConfig(seed=0, replicates=30), preset_params(k)).stats
        sd = sd_runs[k]
        mask = sd.window(1.0, 100.0)
        for col in ("n", "np", "trec_pct"):
            ref = sd.trec_pct if col == "trec_pct" else getattr(sd, col)
            z = np.abs(stats.mean[col][mask] - ref[mask]) / stats.stderr(col)[mask]
            worst[f"s{k}.{col}"] = float(np.max(z))
    elapsed = time.perf_counter() - start
    peak = max(worst, key=worst.get)
    ok = all(v <= 4.0 for v in worst.values()) and elapsed < 300
    detail = f"max |mean-SD|/SE = {worst[peak]:.2f} ({peak}); {elapsed:.1f}s"
    assert record(3, "ABS ensemble within 4 SE of SD", ok, detail), detail


def test_4_abs_noise(abs_runs):
    mins = {}
    for k in (2, 3):
        stats = abs_runs[k].stats
        mins[k] = float(np.min(stats.sd["np"][stats.t > 1.0]))
    ok = all(v > 0 for v in mins.values())
    detail = ", ".join(f"s{k} min sd(Np)={v:.3g}" for k, v in mins.items())
    assert record(4, "ABS Np stddev > 0 after t=1", ok, detail), detail


def test_5_resource_ordering():
    reports, comparisons = cmd_bench([ScenarioSpec(k) for k in (1, 2, 3)], measure_memory=False)
    assert len(reports) == 6
    ok = all(c.wall_time_s["sd"] < c.wall_time_s["abs"] for c in comparisons)
    detail = ", ".join(f"{c.scenario} sd={c.wall_time_s['sd']:.3f}s abs={c.wall_time_s['abs']:.2f}s"
                       for c in comparisons)
    assert record(5, "SD faster than ABS at matched dt/horizon", ok, detail), detail


def _max_rel_err(tr, ref):
    worst = 0.0
    for col in ("n", "np", "m"):
        a, b = getattr(tr, col), getattr(ref, col)
        mask = b > 1e-6
        if mask.any():
            worst = max(worst, float(np.max(np.abs(a - b)[mask] / b[mask])))
    return worst


def test_6_numerical_integrity():
    ratios = {}
    for k in (1, 2, 3):
        p = preset_params(k)
        ref = run_sd(SdConfig(dt=1 / 2048), p)
        e1 = _max_rel_err(run_sd(SdConfig(dt=1 / 32), p), ref)
        e2 = _max_rel_err(run_sd(SdConfig(dt=1 / 64), p), ref)
        ratios[k] = e1 / e2

    # linear system with a closed form
    lin = ModelParams(lambda_n=0.22, np_bar=387.0, s_bar=0.0, b=0.0, c=0.0, lambda_mn=0.0)
    tr = run_sd(SdConfig(), lin)
    kk = lin.lambda_n + lin.mu_n
    exact = 3673.0 * np.exp(-kk * tr.t) + lin.s0 / (kk - lin.lambda_t) * (
        np.exp(-lin.lambda_t * tr.t) - np.exp(-kk * tr.t))
    closed_err = float(np.max(np.abs(tr.n - exact) / exact))

    fixed_ok = True
    for np_bar in (387.0, 713.0, 392.0):
        p = ModelParams(lambda_n=0.0, np_bar=np_bar, s_bar=0.0, b=0.0, s0=0.0, lambda_mn=0.0,
                        c=0.13 * (1 + 300 / np_bar))
        drift = derivatives(StateVector(0, 0, 300.0, 0), p)[1]
        fixed_ok &= abs(drift) <= 300 * 0.13 * 4 * np.finfo(float).eps
        for start in (150.0, 600.0):
            traj = run_sd(SdConfig(initial=StateVector(0, 0, start, 0)), p)
            d = np.abs(traj.np - 300.0)
            fixed_ok &= bool(np.all(np.diff(d) <= 0) and d[-1] < 0.05 * abs(start - 300))

    ok = min(ratios.values()) >= 8 and closed_err < 1e-6 and fixed_ok
    detail = (", ".join(f"s{k} ratio={r:.1f}" for k, r in ratios.items())
              + f"; closed-form rel err {closed_err:.2e}; fixed point {'ok' if fixed_ok else 'broken'}")
    assert record(6, "RK4 order, closed form, fixed point", ok, detail), detail


def test_7_determinism(presets):
    sd_same = all(run_sd(SdConfig(), p).equals(run_sd(SdConfig(), p)) for p in presets.values())
    cfg = AbsConfig(seed=2024, replicates=30)
    serial = run_abs(cfg, presets[2], workers=1)
    parallel = run_abs(cfg, presets[2], workers=4)
    abs_same = all(a.equals(b) for a, b in zip(serial.replicates, parallel.replicates))
    abs_same &= all(np.array_equal(serial.stats.mean[c], parallel.stats.mean[c]) for c in serial.stats.mean)
    detail = f"SD repeat identical={sd_same}; ABS 1 vs 4 workers identical={abs_same}"
    assert record(7, "bit-identical reruns", sd_same and abs_same, detail), detail


def test_8_fidelity():
    golden = {
        1: dict(c=0.0, lambda_n=0.22, lambda_mn=0.05, np_bar=387.0, s_bar=0.48, b=3.4, mu_np=0.13),
        2: dict(s_bar=0.0, b=0.0, lambda_n=2.1, lambda_mn=0.0, np_bar=713.0),
        3: dict(s_bar=0.0, lambda_n=0.003, lambda_mn=0.0, np_bar=392.0, b=4.2),
    }
    presets_ok = all(getattr(preset_params(k), f) == v for k, row in golden.items() for f, v in row.items())
    presets_ok &= all(preset_params(k).lambda_t == math.log(2) / 15.7 for k in golden)
    rows = [(b.age_lo, b.age_hi, b.log10_trec, b.n) for b in TREC_DATA]
    data_ok = rows == [
        (0, 0, 5.03, 48), (1, 4, 4.93, 53), (5, 9, 4.86, 19), (10, 14, 4.86, 19),
        (15, 19, 4.56, 33), (20, 24, 3.88, 26), (25, 29, 3.75, 47), (30, 34, 3.61, 65),
        (35, 39, 3.54, 73), (40, 44, 3.52, 52), (45, 49, 3.37, 55), (50, 54, 3.17, 16),
    ] and TREC_DATA.total_individuals == 506
    detail = f"presets pinned={presets_ok}; 12 dataset rows, 506 individuals={data_ok}"
    assert record(8, "preset and dataset fidelity", presets_ok and data_ok, detail), detail
